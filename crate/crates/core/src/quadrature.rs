//! One-dimensional quadrature shared by the magnetics and eddy modules.
//!
//! Two rules live here: a fixed composite Gauss-Legendre rule for smooth
//! integrands on a finite interval, and a globally adaptive Gauss-Kronrod
//! (7/15) rule with bisection of the worst interval.

use crate::error::{Error, Result};

/// Positive abscissae and weights of the 8-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss 7-point weights, paired with XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Nodes (mapped to `[lo, hi]`) and weights of the 8-point Gauss-Legendre rule.
pub fn gauss_legendre_8(lo: f64, hi: f64) -> [(f64, f64); 8] {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut out = [(0.0, 0.0); 8];
    for (i, (&x, &w)) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()).enumerate() {
        out[2 * i] = (mid - half * x, half * w);
        out[2 * i + 1] = (mid + half * x, half * w);
    }
    out
}

/// Composite 8-point Gauss-Legendre rule with `panels` equal panels.
pub fn composite_gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let a = lo + width * p as f64;
        let b = if p + 1 == panels { hi } else { a + width };
        for (x, w) in gauss_legendre_8(a, b) {
            sum += w * f(x);
        }
    }
    sum
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod_segment<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Tolerances and budget for [`adaptive_gauss_kronrod`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive G7/K15 integration over consecutive `breakpoints`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate falls below `max(abs_tol, rel_tol * |value|)`. The schedule depends
/// only on the inputs, so repeated calls are bit-identical.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Result<Quadrature> {
    if breakpoints.len() < 2 {
        return Err(Error::invalid("need at least two breakpoints"));
    }
    let mut segments: Vec<Segment> = breakpoints
        .windows(2)
        .map(|w| kronrod_segment(&f, w[0], w[1]))
        .collect();

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Convergence {
                what: "adaptive quadrature",
                diagnostic: "integrand produced a non-finite value".into(),
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Quadrature {
                value,
                error,
                intervals: segments.len(),
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Convergence {
                what: "adaptive quadrature",
                diagnostic: format!(
                    "error estimate {error:.3e} above target {target:.3e} after {} intervals",
                    segments.len()
                ),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .fold(0, |best, (i, s)| if s.error > segments[best].error { i } else { best });
        let s = segments[worst];
        let mid = 0.5 * (s.lo + s.hi);
        segments[worst] = kronrod_segment(&f, s.lo, mid);
        segments.insert(worst + 1, kronrod_segment(&f, mid, s.hi));
    }
}
