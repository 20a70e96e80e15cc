//! Field steering for the orthogonal transmitter pair and mutual inductance
//! between coaxial square loops and between a loop and a coaxial metal plate.

mod closed_form;
mod neumann;

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

pub use closed_form::{
    coil_coil_single_turn, coil_plate_single_turn, mutual_inductance_coil_coil_closed,
    mutual_inductance_coil_plate, mutual_inductance_coil_plate_numeric, PLATE_QUADRATURE_PANELS,
};
pub use neumann::{
    mutual_inductance_neumann, mutual_inductance_neumann_with, neumann_fixed, neumann_polygons,
    square_contour, NeumannEstimate, NeumannOptions,
};

/// Vacuum permeability, N/A^2.
pub const MU0: f64 = 4.0 * PI * 1e-7;

/// Square loop of side `2 * half_side` with `turns` thin turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareLoop {
    half_side: f64,
    turns: u32,
}

impl SquareLoop {
    pub fn new(half_side: f64, turns: u32) -> Result<Self> {
        ensure_positive("half_side", half_side)?;
        if turns == 0 {
            return Err(Error::invalid("turns must be >= 1"));
        }
        Ok(Self { half_side, turns })
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn turns(&self) -> u32 {
        self.turns
    }
}

/// Two square loops sharing an axis, `separation` apart, edges parallel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoaxialPair {
    pub primary: SquareLoop,
    pub secondary: SquareLoop,
    pub separation: f64,
}

impl CoaxialPair {
    pub fn new(primary: SquareLoop, secondary: SquareLoop, separation: f64) -> Result<Self> {
        ensure_positive("separation", separation)?;
        Ok(Self {
            primary,
            secondary,
            separation,
        })
    }

    pub fn swapped(&self) -> Self {
        Self {
            primary: self.secondary,
            secondary: self.primary,
            separation: self.separation,
        }
    }

    pub(crate) fn turns_product(&self) -> f64 {
        f64::from(self.primary.turns) * f64::from(self.secondary.turns)
    }
}

/// Receiver centre position in the XOY plane, seen from the transmitter centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverPose {
    pub distance: f64,
    pub azimuth: f64,
}

impl ReceiverPose {
    /// Azimuth is wrapped into `[0, 2pi)`.
    pub fn new(distance: f64, azimuth: f64) -> Result<Self> {
        ensure_positive("distance", distance)?;
        if !azimuth.is_finite() {
            return Err(Error::invalid("azimuth must be finite"));
        }
        Ok(Self {
            distance,
            azimuth: wrap_angle(azimuth),
        })
    }
}

/// In-plane flux density (T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
}

impl FieldVector {
    pub fn magnitude(&self) -> f64 {
        self.bx.hypot(self.by)
    }
}

/// Complex amplitudes of the two in-plane flux density components (T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPhasor {
    pub bx: Complex64,
    pub by: Complex64,
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Splits a field of magnitude `magnitude` pointing at `theta` into x/y parts.
pub fn field_components(magnitude: f64, theta: f64) -> FieldVector {
    let (s, c) = theta.sin_cos();
    FieldVector {
        bx: magnitude * c,
        by: magnitude * s,
    }
}

/// Magnitude and direction in `[0, 2pi)` of an in-plane field.
pub fn field_angle(v: FieldVector) -> Result<(f64, f64)> {
    if v.bx == 0.0 && v.by == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok((v.magnitude(), wrap_angle(v.by.atan2(v.bx))))
}

/// Flux density at the common centre of the orthogonal pair.
///
/// Coil B (YOZ plane) drives the x component and coil A (XOZ plane) the y
/// component; `coil` is the shared geometry of both transmitters.
pub fn b_field_at_origin(i_a: Complex64, i_b: Complex64, coil: &SquareLoop) -> FieldPhasor {
    let k = -SQRT_2 * MU0 * f64::from(coil.turns) / (PI * coil.half_side);
    FieldPhasor {
        bx: i_b * k,
        by: i_a * k,
    }
}

/// Instantaneous direction of the composite field for amplitudes `i_a_amp`,
/// `i_b_amp` and phase offset `delta_phi` (coil A relative to coil B).
///
/// Returned in `(-pi/2, pi/2]`; the field axis is only defined modulo pi
/// because the field reverses every half period.
pub fn steering_angle(i_a_amp: f64, i_b_amp: f64, delta_phi: f64, omega_t: f64) -> Result<f64> {
    let num = i_a_amp * (omega_t + delta_phi).cos();
    let den = i_b_amp * omega_t.cos();
    let scale = i_a_amp.abs().max(i_b_amp.abs());
    if den == 0.0 || den.abs() <= 1e-12 * scale {
        return Err(Error::SteeringPole);
    }
    Ok((num / den).atan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn components_on_axes() {
        let v = field_components(1.0, 0.0);
        assert_eq!((v.bx, v.by), (1.0, 0.0));
        let v = field_components(1.0, FRAC_PI_2);
        assert!(close(v.bx, 0.0, 1e-16) && v.by == 1.0);
        let v = field_components(1.0, FRAC_PI_4);
        let h = 2f64.sqrt() / 2.0;
        assert!(close(v.bx, h, 1e-15) && close(v.by, h, 1e-15));
    }

    #[test]
    fn angle_quadrants() {
        assert_eq!(field_angle(FieldVector { bx: 0.0, by: 1.0 }).unwrap(), (1.0, FRAC_PI_2));
        let (m, t) = field_angle(FieldVector { bx: -1.0, by: 0.0 }).unwrap();
        assert_eq!(m, 1.0);
        assert!(close(t, PI, 1e-15));
        let (m, t) = field_angle(FieldVector { bx: 3.0, by: 4.0 }).unwrap();
        assert_eq!(m, 5.0);
        assert_eq!(t, 4f64.atan2(3.0));
        let (_, t) = field_angle(FieldVector { bx: 1.0, by: -1.0 }).unwrap();
        assert!(close(t, 7.0 * FRAC_PI_4, 1e-15));
    }

    #[test]
    fn zero_vector_has_no_angle() {
        assert!(matches!(
            field_angle(FieldVector { bx: 0.0, by: 0.0 }),
            Err(Error::UndefinedAngle)
        ));
    }

    #[test]
    fn origin_field_hand_evaluation() {
        let coil = SquareLoop::new(0.164, 3).unwrap();
        let zero = b_field_at_origin(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), &coil);
        assert_eq!(zero.bx.norm(), 0.0);
        assert_eq!(zero.by.norm(), 0.0);

        let f = b_field_at_origin(Complex64::new(0.0, 0.0), Complex64::new(10.0, 0.0), &coil);
        // sqrt2 * 4pi e-7 * 3 * 10 / (pi * 0.164) = 1.2e-5 * sqrt2 / 0.164
        let expected = -1.2e-5 * SQRT_2 / 0.164;
        assert!(close(f.bx.re, expected, 1e-18));
        assert!((f.bx.re + 1.035e-4).abs() < 5e-8);
        assert_eq!(f.by.norm(), 0.0);

        let one = b_field_at_origin(Complex64::new(1.5, 0.5), Complex64::new(0.0, 0.0), &coil);
        let two = b_field_at_origin(Complex64::new(3.0, 1.0), Complex64::new(0.0, 0.0), &coil);
        assert_eq!(two.by, one.by * 2.0);
    }

    #[test]
    fn steering_examples() {
        for wt in [0.0, 0.3, 1.0, 2.0] {
            assert!(close(steering_angle(2.0, 2.0, 0.0, wt).unwrap(), FRAC_PI_4, 1e-15));
        }
        assert_eq!(steering_angle(0.0, 1.0, 0.0, 0.4).unwrap(), 0.0);
        let t = steering_angle(1.0, 3f64.sqrt(), 0.0, 0.2).unwrap();
        assert!(close(t, FRAC_PI_6, 1e-15));
        // Anti-phase drive mirrors the axis and stays time independent.
        let t = steering_angle(1.0, 3f64.sqrt(), PI, 0.7).unwrap();
        assert!(close(t, -FRAC_PI_6, 1e-14));
    }

    #[test]
    fn steering_pole() {
        assert!(matches!(steering_angle(1.0, 0.0, 0.0, 0.0), Err(Error::SteeringPole)));
        assert!(matches!(steering_angle(1.0, 1.0, 0.0, FRAC_PI_2), Err(Error::SteeringPole)));
    }

    #[test]
    fn geometry_validation() {
        assert!(SquareLoop::new(0.0, 1).is_err());
        assert!(SquareLoop::new(0.1, 0).is_err());
        let l = SquareLoop::new(0.1, 1).unwrap();
        assert!(CoaxialPair::new(l, l, 0.0).is_err());
        assert!(CoaxialPair::new(l, l, -1.0).is_err());
        let p = ReceiverPose::new(0.2, -FRAC_PI_2).unwrap();
        assert!(close(p.azimuth, 3.0 * FRAC_PI_2, 1e-15));
    }

    proptest! {
        #[test]
        fn angle_round_trip(b in 1e-9f64..1e3, theta in 0.0f64..TAU) {
            let (m, t) = field_angle(field_components(b, theta)).unwrap();
            prop_assert!((m - b).abs() <= 1e-12 * b);
            let mut dt = (t - theta).abs();
            dt = dt.min(TAU - dt);
            prop_assert!(dt <= 1e-12);
        }
    }
}
