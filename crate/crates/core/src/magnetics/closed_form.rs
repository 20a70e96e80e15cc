//! Closed-form approximations for square-loop and square-plate coupling.
//!
//! The coil/coil form reads the logarithm as
//! `ln sqrt(((a+b)^2 + h^2) / ((a-b)^2 + h^2))`, which keeps its argument
//! dimensionless. It overestimates the Neumann value by roughly a factor of
//! two at desk-scale geometry (see the tests) and is kept as a labelled
//! approximation. The plate form is its exact integral over the plate half
//! side `b' in [0, b]`; that integral carries one extra length dimension, and
//! its numeric value is used as the plate coupling in henry.

use super::{CoaxialPair, SquareLoop, MU0};
use crate::error::{ensure_positive, Error, Result};
use crate::quadrature::composite_gauss_legendre;
use std::f64::consts::PI;

/// Panels used when the plate coupling is integrated numerically.
pub const PLATE_QUADRATURE_PANELS: usize = 64;

fn log_ratio(a: f64, b: f64, h: f64) -> Result<f64> {
    let near = (a - b).powi(2) + h * h;
    let far = (a + b).powi(2) + h * h;
    if !(near > 0.0) || !near.is_normal() {
        return Err(Error::SingularLog(format!(
            "(a - b)^2 + h^2 = {near:e} for a = {a}, b = {b}, h = {h}"
        )));
    }
    Ok((far / near).ln())
}

/// Single-turn coil/coil approximation for half sides `a`, `b` at distance `h`.
pub fn coil_coil_single_turn(a: f64, b: f64, h: f64) -> Result<f64> {
    ensure_positive("a", a)?;
    ensure_positive("h", h)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    ensure_positive("b", b)?;
    Ok(4.0 * MU0 * b / PI * 0.5 * log_ratio(a, b, h)?)
}

/// Single-turn coil/plate closed form for coil half side `a`, plate half side `b`.
pub fn coil_plate_single_turn(a: f64, b: f64, h: f64) -> Result<f64> {
    ensure_positive("a", a)?;
    ensure_positive("h", h)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    ensure_positive("b", b)?;
    let near_log = ((a - b).powi(2) + h * h).ln(); // #1
    let far_log = ((a + b).powi(2) + h * h).ln(); // #2
    if !near_log.is_finite() {
        return Err(Error::SingularLog(format!("a = {a}, b = {b}, h = {h}")));
    }
    let bracket = a * b + a * h * ((a - b) / h).atan() - a * h * ((a + b) / h).atan()
        + (a * a - b * b - h * h) * (near_log - far_log) / 4.0;
    Ok(4.0 * MU0 / PI * bracket)
}

/// Closed-form coil/coil mutual inductance, scaled by `N1 * N2`.
pub fn mutual_inductance_coil_coil_closed(pair: &CoaxialPair) -> Result<f64> {
    Ok(pair.turns_product()
        * coil_coil_single_turn(
            pair.primary.half_side(),
            pair.secondary.half_side(),
            pair.separation,
        )?)
}

/// Closed-form coil/plate coupling (plate treated as a single turn).
pub fn mutual_inductance_coil_plate(
    primary: &SquareLoop,
    plate_half_side: f64,
    separation: f64,
) -> Result<f64> {
    ensure_positive("plate_half_side", plate_half_side)?;
    Ok(f64::from(primary.turns())
        * coil_plate_single_turn(primary.half_side(), plate_half_side, separation)?)
}

/// The same coupling by integrating the coil/coil form over `b' in [0, b]`.
pub fn mutual_inductance_coil_plate_numeric(
    primary: &SquareLoop,
    plate_half_side: f64,
    separation: f64,
    panels: usize,
) -> Result<f64> {
    ensure_positive("plate_half_side", plate_half_side)?;
    ensure_positive("separation", separation)?;
    let a = primary.half_side();
    // Validate the whole range once; the integrand is smooth for h > 0.
    log_ratio(a, plate_half_side, separation)?;
    let integral = composite_gauss_legendre(
        |b| coil_coil_single_turn(a, b, separation).unwrap_or(f64::NAN),
        0.0,
        plate_half_side,
        panels.max(PLATE_QUADRATURE_PANELS),
    );
    if !integral.is_finite() {
        return Err(Error::SingularLog(format!(
            "coil/coil form singular inside [0, {plate_half_side}]"
        )));
    }
    Ok(f64::from(primary.turns()) * integral)
}
