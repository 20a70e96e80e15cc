//! Neumann double line integral between closed polygonal contours.
//!
//! M = mu0 / (4 pi) * sum over edge pairs of  \int\int dl1 . dl2 / |r1 - r2|,
//! each edge integrated with composite 8-point Gauss-Legendre. Edge pairs
//! with orthogonal directions contribute nothing and are skipped.

use super::{CoaxialPair, MU0};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_8;
use std::f64::consts::PI;

pub type Point3 = [f64; 3];

/// Counter-clockwise square of half side `half_side` centred on the z axis at height `z`.
pub fn square_contour(half_side: f64, z: f64) -> Vec<Point3> {
    let s = half_side;
    vec![[s, -s, z], [s, s, z], [-s, s, z], [-s, -s, z]]
}

struct EdgeNodes {
    direction: Point3,
    points: Vec<Point3>,
    weights: Vec<f64>,
}

fn edge_nodes(p0: Point3, p1: Point3, panels: usize) -> EdgeNodes {
    let d = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let mut points = Vec::with_capacity(panels * 8);
    let mut weights = Vec::with_capacity(panels * 8);
    let step = 1.0 / panels as f64;
    for p in 0..panels {
        let lo = p as f64 * step;
        for (t, w) in gauss_legendre_8(lo, lo + step) {
            points.push([p0[0] + t * d[0], p0[1] + t * d[1], p0[2] + t * d[2]]);
            weights.push(w);
        }
    }
    EdgeNodes {
        direction: d,
        points,
        weights,
    }
}

fn edges(contour: &[Point3], panels: usize) -> Vec<EdgeNodes> {
    (0..contour.len())
        .map(|i| edge_nodes(contour[i], contour[(i + 1) % contour.len()], panels))
        .collect()
}

/// Single-turn Neumann mutual inductance of two closed polygons at a fixed
/// discretisation of `panels` Gauss-Legendre panels per edge.
pub fn neumann_polygons(first: &[Point3], second: &[Point3], panels: usize) -> f64 {
    let e1 = edges(first, panels);
    let e2 = edges(second, panels);
    let mut total = 0.0;
    for a in &e1 {
        for b in &e2 {
            let dot = a.direction[0] * b.direction[0]
                + a.direction[1] * b.direction[1]
                + a.direction[2] * b.direction[2];
            if dot == 0.0 {
                continue;
            }
            let mut pair = 0.0;
            for (pa, wa) in a.points.iter().zip(&a.weights) {
                let mut inner = 0.0;
                for (pb, wb) in b.points.iter().zip(&b.weights) {
                    let dx = pa[0] - pb[0];
                    let dy = pa[1] - pb[1];
                    let dz = pa[2] - pb[2];
                    inner += wb / (dx * dx + dy * dy + dz * dz).sqrt();
                }
                pair += wa * inner;
            }
            total += dot * pair;
        }
    }
    MU0 / (4.0 * PI) * total
}

/// Refinement schedule for [`mutual_inductance_neumann_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannOptions {
    /// Stop once two successive panel doublings differ by less than this (relative).
    pub rel_tol: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            initial_panels: 2,
            max_panels: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannEstimate {
    /// Mutual inductance including the turns product, H.
    pub value: f64,
    /// Estimate at half the final panel count.
    pub previous: f64,
    pub panels: usize,
}

impl NeumannEstimate {
    pub fn relative_change(&self) -> f64 {
        ((self.value - self.previous) / self.value).abs()
    }
}

/// Coaxial pair mutual inductance at a fixed discretisation, turns included.
pub fn neumann_fixed(pair: &CoaxialPair, panels: usize) -> f64 {
    let lower = square_contour(pair.primary.half_side(), 0.0);
    let upper = square_contour(pair.secondary.half_side(), pair.separation);
    pair.turns_product() * neumann_polygons(&lower, &upper, panels)
}

/// Converged Neumann mutual inductance of a coaxial pair (the reference value
/// the closed forms are checked against).
pub fn mutual_inductance_neumann(pair: &CoaxialPair) -> Result<f64> {
    mutual_inductance_neumann_with(pair, NeumannOptions::default()).map(|e| e.value)
}

pub fn mutual_inductance_neumann_with(
    pair: &CoaxialPair,
    opts: NeumannOptions,
) -> Result<NeumannEstimate> {
    if !(pair.separation > 0.0) {
        return Err(Error::invalid("separation must be > 0"));
    }
    let mut panels = opts.initial_panels.max(1);
    let mut previous = neumann_fixed(pair, panels);
    loop {
        panels *= 2;
        let value = neumann_fixed(pair, panels);
        let estimate = NeumannEstimate {
            value,
            previous,
            panels,
        };
        if value != 0.0 && estimate.relative_change() < opts.rel_tol {
            return Ok(estimate);
        }
        if panels >= opts.max_panels {
            return Err(Error::Convergence {
                what: "Neumann integral",
                diagnostic: format!(
                    "relative change {:.3e} at {panels} panels per edge (target {:.1e})",
                    estimate.relative_change(),
                    opts.rel_tol
                ),
            });
        }
        previous = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::SquareLoop;

    fn pair(a: f64, b: f64, h: f64) -> CoaxialPair {
        CoaxialPair::new(
            SquareLoop::new(a, 1).unwrap(),
            SquareLoop::new(b, 1).unwrap(),
            h,
        )
        .unwrap()
    }

    #[test]
    fn golden_reference_value() {
        // a = b = 0.164 m, h = 0.2 m, single turns. Frozen from this oracle
        // (and an independent 400-node numpy evaluation: 7.956224007665e-8).
        let m = mutual_inductance_neumann(&pair(0.164, 0.164, 0.2)).unwrap();
        assert!(((m - 7.956_224_007_665e-8) / m).abs() < 1e-9, "{m:e}");
    }

    #[test]
    fn reciprocity_for_non_coaxial_polygons() {
        let tri = vec![[0.0, 0.0, 0.0], [0.3, 0.05, 0.02], [0.1, 0.25, -0.04]];
        let sq: Vec<Point3> = square_contour(0.12, 0.15)
            .into_iter()
            .map(|p| [p[0] + 0.05, p[1] - 0.02, p[2]])
            .collect();
        let m12 = neumann_polygons(&tri, &sq, 32);
        let m21 = neumann_polygons(&sq, &tri, 32);
        assert!(((m12 - m21) / m12).abs() < 1e-12);
    }

    #[test]
    fn coaxial_swap_is_symmetric() {
        let p = pair(0.164, 0.1, 0.2);
        let m = mutual_inductance_neumann(&p).unwrap();
        let s = mutual_inductance_neumann(&p.swapped()).unwrap();
        assert!(((m - s) / m).abs() < 1e-9);
    }

    #[test]
    fn turns_scale_exactly() {
        let one = neumann_fixed(&pair(0.2, 0.1, 0.3), 16);
        let p = CoaxialPair::new(
            SquareLoop::new(0.2, 3).unwrap(),
            SquareLoop::new(0.1, 4).unwrap(),
            0.3,
        )
        .unwrap();
        assert_eq!(neumann_fixed(&p, 16), 12.0 * one);
    }

    #[test]
    fn far_field_decays_cubically() {
        let a = 0.164;
        let near = mutual_inductance_neumann(&pair(a, a, a)).unwrap();
        let far = mutual_inductance_neumann(&pair(a, a, 100.0 * a)).unwrap();
        let farther = mutual_inductance_neumann(&pair(a, a, 200.0 * a)).unwrap();
        assert!(far > 0.0 && far < 1e-5 * near);
        // Dipole regime: doubling h divides M by ~8.
        assert!((far / farther - 8.0).abs() < 0.01);
        // Dipole estimate mu0 (2a)^2 (2a)^2 / (2 pi h^3).
        let h = 100.0 * a;
        let dipole = MU0 * 16.0 * a.powi(4) / (2.0 * PI * h.powi(3));
        assert!(((far - dipole) / dipole).abs() < 1e-3);
    }

    #[test]
    fn refinement_budget_exhaustion() {
        let opts = NeumannOptions {
            rel_tol: 1e-15,
            initial_panels: 1,
            max_panels: 4,
        };
        let err = mutual_inductance_neumann_with(&pair(0.3, 0.3, 0.01), opts).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }
}
