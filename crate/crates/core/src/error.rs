use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a documented invariant (non-positive length, zero turns, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("angle is undefined for a zero field vector")]
    UndefinedAngle,

    #[error("steering angle has a pole: I_B cos(wt) = 0 at the evaluated instant")]
    SteeringPole,

    #[error("logarithm argument is singular ({0})")]
    SingularLog(String),

    #[error("{what} did not converge: {diagnostic}")]
    Convergence { what: &'static str, diagnostic: String },

    #[error("degenerate configuration: {0}")]
    Singular(String),

    #[error("model-reduction constants are inconsistent: {0}")]
    EquivalenceViolation(String),

    #[error(
        "training data is not separable: envelopes overlap at {overlapping} of {gated} gated grid points in the {plane} plane"
    )]
    NonSeparable {
        plane: &'static str,
        overlapping: usize,
        gated: usize,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {value}")))
    }
}
