//! Bessel function of the first kind, order one.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J1(x)` with absolute error below 1e-10 on `[0, 200]`.
///
/// Power series for `|x| < 8`, Miller backward recurrence on `[8, 25)`,
/// Hankel asymptotic expansion beyond. Odd in `x`.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x == 0.0 {
        0.0
    } else if x < SERIES_LIMIT {
        series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half;
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(x: f64) -> f64 {
    // Start well above x so the minimal solution dominates; normalise with
    // J0 + 2 (J2 + J4 + ...) = 1.
    let mut n = (x as usize + 40) & !1;
    let mut above = 0.0_f64;
    let mut current = 1e-300_f64;
    let mut norm = 0.0;
    let mut j1 = 0.0;
    while n > 0 {
        let below = 2.0 * n as f64 / x * current - above;
        above = current;
        current = below;
        n -= 1;
        if n == 1 {
            j1 = current;
        }
        if n.is_multiple_of(2) && n > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += current;
    j1 / norm
}

fn asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - 3.0 * FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_oddness() {
        assert_eq!(bessel_j1(0.0), 0.0);
        assert_eq!(bessel_j1(-2.5), -bessel_j1(2.5));
    }

    #[test]
    fn tabulated_values() {
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-12);
        assert!((bessel_j1(5.0) + 0.327_579_137_591_465_2).abs() < 1e-12);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-12);
        assert!((bessel_j1(30.0) + 0.118_751_062_616_623_8).abs() < 1e-12);
    }

    #[test]
    fn regimes_agree_at_the_seams() {
        for &x in &[SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            let left = if x == SERIES_LIMIT { series(x) } else { miller(x) };
            let right = if x == SERIES_LIMIT { miller(x) } else { asymptotic(x) };
            assert!((left - right).abs() < 1e-12, "x = {x}: {left} vs {right}");
        }
    }

    #[test]
    fn small_argument_limit() {
        let x = 1e-4;
        assert!((bessel_j1(x) - x / 2.0).abs() < 1e-12);
    }
}
