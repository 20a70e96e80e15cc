//! Equivalent series resistance and inductance of a conducting plate facing
//! a transmitter coil.
//!
//! R_m = w pi mu0 \int_0^inf Im phi(k) e^{-2kd} T(k) dk
//! L_m =   pi mu0 \int_0^inf Re phi(k) e^{-2kd} T(k) dk
//!
//! with the reflection kernel `phi` of the half-space and the coil weight
//! `T(k) = (N a J1(k a))^2`. The coil is described through the circular
//! kernel even though it is square.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::magnetics::MU0;
use crate::quadrature::{adaptive_gauss_kronrod, AdaptiveOptions};
use crate::special::bessel_j1;
use std::f64::consts::PI;

/// Maximum of |J1| on the real line (attained near x = 1.8412).
const J1_SUP: f64 = 0.581_865_224_221_584_1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetalMaterial {
    pub name: String,
    /// S/m
    pub conductivity: f64,
    pub rel_permeability: f64,
}

impl MetalMaterial {
    pub fn new(name: &str, conductivity: f64, rel_permeability: f64) -> Result<Self> {
        ensure_positive("conductivity", conductivity)?;
        if !(rel_permeability.is_finite() && rel_permeability >= 1.0) {
            return Err(Error::invalid(format!(
                "relative permeability must be >= 1, got {rel_permeability}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            conductivity,
            rel_permeability,
        })
    }

    pub fn with_rel_permeability(&self, rel_permeability: f64) -> Result<Self> {
        Self::new(&self.name, self.conductivity, rel_permeability)
    }
}

/// Coil/plate geometry and drive frequency seen by the eddy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EddyGeometry {
    /// m
    pub coil_half_side: f64,
    pub coil_turns: u32,
    /// Coil-to-plate distance, m.
    pub plate_distance: f64,
    /// rad/s
    pub angular_frequency: f64,
}

impl EddyGeometry {
    pub fn new(
        coil_half_side: f64,
        coil_turns: u32,
        plate_distance: f64,
        angular_frequency: f64,
    ) -> Result<Self> {
        ensure_positive("coil_half_side", coil_half_side)?;
        ensure_positive("plate_distance", plate_distance)?;
        ensure_positive("angular_frequency", angular_frequency)?;
        if coil_turns == 0 {
            return Err(Error::invalid("coil_turns must be >= 1"));
        }
        Ok(Self {
            coil_half_side,
            coil_turns,
            plate_distance,
            angular_frequency,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EddyImpedance {
    /// Ohm
    pub r_m: f64,
    /// H; the sign is whatever the integral gives.
    pub l_m: f64,
}

impl EddyImpedance {
    pub fn impedance(&self, omega: f64) -> Complex64 {
        Complex64::new(self.r_m, omega * self.l_m)
    }
}

/// Half-space reflection kernel for spatial frequency `k`.
pub fn phi_k(k: f64, geom: &EddyGeometry, mat: &MetalMaterial) -> Complex64 {
    let mu_r = mat.rel_permeability;
    let alpha = geom.angular_frequency * mat.conductivity * MU0 * mu_r;
    let root = Complex64::new(k * k, alpha).sqrt();
    let km = k * mu_r;
    let den = root + km;
    if den.norm() == 0.0 {
        // k = 0 with a non-conducting medium: the limit is 1.
        return Complex64::new(1.0, 0.0);
    }
    (root - km) / den
}

/// Coil weight `(N a J1(k a))^2`.
pub fn geometry_factor(k: f64, geom: &EddyGeometry) -> f64 {
    let a = geom.coil_half_side;
    let v = f64::from(geom.coil_turns) * a * bessel_j1(k * a);
    v * v
}

/// Quadrature controls for [`plate_impedance_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EddyOptions {
    pub rel_tol: f64,
    /// Truncation target: certified tail below `tail_tol` times the integral.
    pub tail_tol: f64,
    /// Largest admissible truncation point, 1/m.
    pub k_max_limit: f64,
    pub max_intervals: usize,
}

impl Default for EddyOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            tail_tol: 1e-12,
            k_max_limit: 1e5,
            max_intervals: 4000,
        }
    }
}

/// Impedance plus quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EddyReport {
    pub impedance: EddyImpedance,
    pub k_max_resistance: f64,
    pub k_max_inductance: f64,
    pub intervals: usize,
}

/// `R_m` and `L_m` with default quadrature settings.
pub fn plate_impedance(geom: &EddyGeometry, mat: &MetalMaterial) -> Result<EddyImpedance> {
    plate_impedance_with(geom, mat, EddyOptions::default()).map(|r| r.impedance)
}

pub fn plate_impedance_with(
    geom: &EddyGeometry,
    mat: &MetalMaterial,
    opts: EddyOptions,
) -> Result<EddyReport> {
    let d = geom.plate_distance;
    let decay = |k: f64| (-2.0 * k * d).exp() * geometry_factor(k, geom);
    let im = |k: f64| phi_k(k, geom, mat).im * decay(k);
    let re = |k: f64| phi_k(k, geom, mat).re * decay(k);

    let (ri, k_r, n_r) = truncated_integral(&im, geom, opts, "R_m")?;
    let (li, k_l, n_l) = truncated_integral(&re, geom, opts, "L_m")?;
    Ok(EddyReport {
        impedance: EddyImpedance {
            r_m: geom.angular_frequency * PI * MU0 * ri,
            l_m: PI * MU0 * li,
        },
        k_max_resistance: k_r,
        k_max_inductance: k_l,
        intervals: n_r + n_l,
    })
}

/// Breakpoints clustered around the kernel peak near `1/(2d)`, geometric beyond.
fn breakpoints(d: f64, k_max: f64) -> Vec<f64> {
    let peak = 1.0 / (2.0 * d);
    let mut pts = vec![0.0];
    let mut k = 0.25 * peak;
    while k < k_max {
        pts.push(k);
        k *= 2.0;
    }
    pts.push(k_max);
    pts
}

fn truncated_integral<F: Fn(f64) -> f64>(
    f: &F,
    geom: &EddyGeometry,
    opts: EddyOptions,
    what: &'static str,
) -> Result<(f64, f64, usize)> {
    let d = geom.plate_distance;
    // |phi| <= 1, so the tail beyond k is at most sup T * e^{-2kd} / (2d),
    // and the whole integral at most sup T / (2d).
    let sup_t = (f64::from(geom.coil_turns) * geom.coil_half_side * J1_SUP).powi(2);
    let bound = sup_t / (2.0 * d);
    let floor = 1e-15 * bound;
    let quad = AdaptiveOptions {
        rel_tol: opts.rel_tol,
        abs_tol: floor,
        max_intervals: opts.max_intervals,
    };
    let pilot_end = (30.0 / d).min(opts.k_max_limit);
    let pilot = adaptive_gauss_kronrod(f, &breakpoints(d, pilot_end), quad)
        .map_err(|e| with_context(e, what))?;
    if pilot.value == 0.0 {
        return Ok((0.0, pilot_end, pilot.intervals));
    }
    let target = (opts.tail_tol * pilot.value.abs()).max(floor);
    let needed = ((bound / target).ln() / (2.0 * d)).max(0.0);
    if needed > opts.k_max_limit {
        return Err(Error::Convergence {
            what: "eddy impedance quadrature",
            diagnostic: format!(
                "{what}: certified tail needs k_max = {needed:.4e} 1/m, limit is {:.4e} 1/m",
                opts.k_max_limit
            ),
        });
    }
    let k_max = needed.max(1.0 / d);
    let q = adaptive_gauss_kronrod(f, &breakpoints(d, k_max), quad)
        .map_err(|e| with_context(e, what))?;
    Ok((q.value, k_max, q.intervals))
}

fn with_context(e: Error, what: &'static str) -> Error {
    match e {
        Error::Convergence { diagnostic, .. } => Error::Convergence {
            what: "eddy impedance quadrature",
            diagnostic: format!("{what}: {diagnostic}"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const OMEGA_20K: f64 = 2.0 * PI * 20e3;

    fn cu() -> MetalMaterial {
        MetalMaterial::new("Cu", 5.88e7, 1.0).unwrap()
    }
    fn fe() -> MetalMaterial {
        MetalMaterial::new("Fe", 1.0e7, 300.0).unwrap()
    }
    fn geom(a: f64) -> EddyGeometry {
        EddyGeometry::new(a, 3, 0.2, OMEGA_20K).unwrap()
    }

    #[test]
    fn phi_limits() {
        let g = geom(0.164);
        assert_eq!(phi_k(0.0, &g, &cu()), Complex64::new(1.0, 0.0));
        let weak = MetalMaterial::new("weak", 1e-12, 1.0).unwrap();
        assert!(phi_k(10.0, &g, &weak).norm() < 1e-12);
    }

    #[test]
    fn phi_against_polar_evaluation() {
        // Principal root via polar form, ratio via real arithmetic.
        let g = geom(0.164);
        let k: f64 = 10.0;
        let alpha = OMEGA_20K * 5.88e7 * 4e-7 * PI;
        let r = (k.powi(4) + alpha * alpha).sqrt().sqrt();
        let half = 0.5 * alpha.atan2(k * k);
        let (sr, si) = (r * half.cos(), r * half.sin());
        let (nr, ni) = (sr - k, si);
        let (dr, di) = (sr + k, si);
        let den = dr * dr + di * di;
        let expected = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
        let got = phi_k(k, &g, &cu());
        assert!((got.re - expected.0).abs() < 1e-14);
        assert!((got.im - expected.1).abs() < 1e-14);
    }

    #[test]
    fn geometry_factor_values() {
        let g = geom(0.164);
        assert_eq!(geometry_factor(0.0, &g), 0.0);
        let k: f64 = 1e-4;
        let small = (3.0 * k * 0.164 * 0.164 / 2.0).powi(2);
        assert!(((geometry_factor(k, &g) - small) / small).abs() < 1e-8);
        // Independent series for J1(1.64).
        let x: f64 = 1.64;
        let mut term = x / 2.0;
        let mut j1 = term;
        for m in 1..30 {
            term *= -(x * x / 4.0) / (m as f64 * (m + 1) as f64);
            j1 += term;
        }
        let expected = 9.0 * 0.164f64.powi(2) * j1 * j1;
        assert!(((geometry_factor(10.0, &g) - expected) / expected).abs() < 1e-13);
    }

    #[test]
    fn non_conducting_limit() {
        let weak = MetalMaterial::new("weak", 1e-9, 1.0).unwrap();
        let z = plate_impedance(&geom(0.1), &weak).unwrap();
        assert!(z.r_m.abs() < 1e-12 && z.l_m.abs() < 1e-12, "{z:?}");
    }

    #[test]
    fn ferrous_plate_dissipates_more() {
        let g = geom(0.1);
        let zc = plate_impedance(&g, &cu()).unwrap();
        let zf = plate_impedance(&g, &fe()).unwrap();
        assert!(zc.r_m > 0.0 && zf.r_m > 5.0 * zc.r_m, "{zc:?} {zf:?}");
        assert!(((zf.l_m - zc.l_m) / zc.l_m).abs() < 0.5);
    }

    #[test]
    fn grows_with_scale() {
        let mut last = EddyImpedance { r_m: 0.0, l_m: 0.0 };
        for i in 1..=10 {
            let z = plate_impedance(&geom(0.05 * i as f64), &fe()).unwrap();
            assert!(z.r_m > last.r_m && z.l_m > last.l_m);
            last = z;
        }
    }

    #[test]
    fn tolerance_halving_is_stable_and_deterministic() {
        let g = geom(0.1);
        let base = plate_impedance(&g, &fe()).unwrap();
        let tight = plate_impedance_with(
            &g,
            &fe(),
            EddyOptions {
                rel_tol: 0.5e-10,
                ..EddyOptions::default()
            },
        )
        .unwrap()
        .impedance;
        assert!(((base.r_m - tight.r_m) / base.r_m).abs() < 1e-4);
        assert!(((base.l_m - tight.l_m) / base.l_m).abs() < 1e-4);
        let again = plate_impedance(&g, &fe()).unwrap();
        assert_eq!(base.r_m.to_bits(), again.r_m.to_bits());
        assert_eq!(base.l_m.to_bits(), again.l_m.to_bits());
    }

    #[test]
    fn low_k_max_limit_is_a_convergence_error() {
        let opts = EddyOptions {
            k_max_limit: 5.0,
            ..EddyOptions::default()
        };
        let err = plate_impedance_with(&geom(0.1), &cu(), opts).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }), "{err}");
    }

    #[test]
    fn resistance_rises_with_frequency() {
        for mat in [cu(), fe(), MetalMaterial::new("Al", 3.44e7, 1.0).unwrap()] {
            let mut last = 0.0;
            for i in 0..10 {
                let f = 10e3 + 10e3 * i as f64;
                let g = EddyGeometry::new(0.1, 3, 0.2, 2.0 * PI * f).unwrap();
                let r = plate_impedance(&g, &mat).unwrap().r_m;
                assert!(r > last, "{} at {f} Hz", mat.name);
                last = r;
            }
        }
    }

    #[test]
    fn invalid_material_and_geometry() {
        assert!(MetalMaterial::new("x", 0.0, 1.0).is_err());
        assert!(MetalMaterial::new("x", 1.0, 0.5).is_err());
        assert!(EddyGeometry::new(0.1, 0, 0.2, 1.0).is_err());
        assert!(EddyGeometry::new(0.1, 1, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_bounded_with_non_negative_imaginary_part(
            k in 0.0f64..1e4,
            f in 1.0f64..1e6,
            sigma in 1e-3f64..1e8,
            mu_r in 1.0f64..1e4,
        ) {
            let g = EddyGeometry::new(0.1, 1, 0.1, 2.0 * PI * f).unwrap();
            let m = MetalMaterial::new("m", sigma, mu_r).unwrap();
            let p = phi_k(k, &g, &m);
            prop_assert!(p.norm() <= 1.0 + 1e-12);
            prop_assert!(p.im >= 0.0);
        }
    }
}
