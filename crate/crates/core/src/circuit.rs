//! Phasor model of the two orthogonal transmitters coupled to one receiver,
//! and of its single coaxial-coil reduction.
//!
//! Sign convention (phasors are RMS, so powers carry no factor 1/2):
//!
//! ```text
//! U_A + jw M_AC I_C = Z_A I_A
//! U_B + jw M_BC I_C = Z_B I_B
//! jw M_AC I_A + jw M_BC I_B = Z_rx I_C
//! ```
//!
//! Coils A and B are orthogonal; their mutual inductance is zero.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eddy::EddyImpedance;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

const J: Complex64 = Complex64::new(0.0, 1.0);

pub const DEFAULT_COIL_RESISTANCE: f64 = 0.1;
pub const DEFAULT_COIL_INDUCTANCE: f64 = 10e-6;

/// Series R-L-C transmitter branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxCoil {
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
}

impl TxCoil {
    pub fn new(resistance: f64, inductance: f64, capacitance: f64) -> Result<Self> {
        ensure_positive("resistance", resistance)?;
        ensure_positive("inductance", inductance)?;
        ensure_positive("capacitance", capacitance)?;
        Ok(Self {
            resistance,
            inductance,
            capacitance,
        })
    }

    /// Capacitance chosen so that `w^2 L C = 1`.
    pub fn resonant(resistance: f64, inductance: f64, omega: f64) -> Result<Self> {
        ensure_positive("omega", omega)?;
        Self::new(resistance, inductance, resonant_capacitance(inductance, omega))
    }

    pub fn reactance(&self, omega: f64) -> f64 {
        omega * self.inductance - 1.0 / (omega * self.capacitance)
    }

    pub fn impedance(&self, omega: f64) -> Complex64 {
        Complex64::new(self.resistance, self.reactance(omega))
    }

    /// `|w^2 L C - 1|`.
    pub fn resonance_mismatch(&self, omega: f64) -> f64 {
        (omega * omega * self.inductance * self.capacitance - 1.0).abs()
    }

    pub fn check_resonance(&self, omega: f64, tol: f64) -> Result<()> {
        let m = self.resonance_mismatch(omega);
        if m <= tol {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "branch is off resonance: |w^2 L C - 1| = {m:.3e} > {tol:.1e}"
            )))
        }
    }
}

pub fn resonant_capacitance(inductance: f64, omega: f64) -> f64 {
    1.0 / (omega * omega * inductance)
}

pub fn angular_frequency(frequency_hz: f64) -> f64 {
    2.0 * PI * frequency_hz
}

/// What sits in front of the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReceiverModel {
    /// Resonant pickup coil with a resistive load.
    Coil {
        resistance: f64,
        inductance: f64,
        capacitance: f64,
        load: f64,
    },
    /// Metal plate reduced to its eddy-current series R-L.
    Metal { r_m: f64, l_m: f64 },
}

impl ReceiverModel {
    pub fn coil(resistance: f64, inductance: f64, capacitance: f64, load: f64) -> Result<Self> {
        ensure_positive("receiver resistance", resistance)?;
        ensure_positive("receiver inductance", inductance)?;
        ensure_positive("receiver capacitance", capacitance)?;
        ensure_positive("load", load)?;
        Ok(Self::Coil {
            resistance,
            inductance,
            capacitance,
            load,
        })
    }

    pub fn metal(eddy: EddyImpedance) -> Result<Self> {
        ensure_non_negative("r_m", eddy.r_m)?;
        if !eddy.l_m.is_finite() {
            return Err(Error::invalid("l_m must be finite"));
        }
        Ok(Self::Metal {
            r_m: eddy.r_m,
            l_m: eddy.l_m,
        })
    }

    pub fn impedance(&self, omega: f64) -> Complex64 {
        match *self {
            Self::Coil {
                resistance,
                inductance,
                capacitance,
                load,
            } => Complex64::new(
                resistance + load,
                omega * inductance - 1.0 / (omega * capacitance),
            ),
            Self::Metal { r_m, l_m } => Complex64::new(r_m, omega * l_m),
        }
    }

    /// Resistance that turns receiver current into heat or load power.
    pub fn dissipative_resistance(&self) -> f64 {
        match *self {
            Self::Coil {
                resistance, load, ..
            } => resistance + load,
            Self::Metal { r_m, .. } => r_m,
        }
    }

    pub fn is_metal(&self) -> bool {
        matches!(self, Self::Metal { .. })
    }
}

/// Transmitter drive: total current amplitude `I`, steering angle `theta`,
/// and phase of coil A relative to coil B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub angular_frequency: f64,
    pub amplitude: f64,
    pub steering: f64,
    #[serde(default)]
    pub phase_offset: f64,
}

impl DriveSpec {
    pub fn new(angular_frequency: f64, amplitude: f64, steering: f64) -> Result<Self> {
        ensure_positive("angular_frequency", angular_frequency)?;
        ensure_non_negative("amplitude", amplitude)?;
        Ok(Self {
            angular_frequency,
            amplitude,
            steering,
            phase_offset: 0.0,
        })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Only in-phase (0) and anti-phase (pi) drives give a fixed field axis.
    pub fn with_phase_offset(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    /// Steering angle with an anti-phase offset folded into its sign.
    pub fn effective_steering(&self) -> Result<f64> {
        let p = self.phase_offset.rem_euclid(2.0 * PI);
        if p.abs() < 1e-12 || (2.0 * PI - p).abs() < 1e-12 {
            Ok(self.steering)
        } else if (p - PI).abs() < 1e-12 {
            Ok(-self.steering)
        } else {
            Err(Error::invalid(format!(
                "phase offset {} rad is neither in-phase nor anti-phase",
                self.phase_offset
            )))
        }
    }

    /// Current phasors `(I_A, I_B)` in the two transmitters.
    pub fn phasors(&self) -> Result<(Complex64, Complex64)> {
        let theta = self.effective_steering()?;
        Ok((
            Complex64::new(self.amplitude * theta.sin(), 0.0),
            Complex64::new(self.amplitude * theta.cos(), 0.0),
        ))
    }
}

/// Couplings of coil A and coil B to the receiver, H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub m_ac: f64,
    pub m_bc: f64,
}

impl Couplings {
    pub fn new(m_ac: f64, m_bc: f64) -> Result<Self> {
        if !(m_ac.is_finite() && m_bc.is_finite()) {
            return Err(Error::invalid("couplings must be finite"));
        }
        Ok(Self { m_ac, m_bc })
    }

    /// Receiver facing the centre at `azimuth` from the X axis, with coaxial
    /// coupling `m`: coil A (normal along Y) sees `m sin`, coil B `m cos`.
    pub fn from_pose(m: f64, azimuth: f64) -> Self {
        Self {
            m_ac: m * azimuth.sin(),
            m_bc: m * azimuth.cos(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.m_ac.hypot(self.m_bc)
    }

    /// `M_AC sin(theta) + M_BC cos(theta)`.
    pub fn projection(&self, theta: f64) -> f64 {
        self.m_ac * theta.sin() + self.m_bc * theta.cos()
    }

    /// `sqrt(M_AC^2 + M_BC^2) sin(theta + atan2(M_BC, M_AC))`.
    fn steered(&self, theta: f64) -> f64 {
        self.magnitude() * (theta + self.m_bc.atan2(self.m_ac)).sin()
    }
}

/// `(I_A, I_B) = (I sin(theta), I cos(theta))`.
pub fn current_decomposition(drive: &DriveSpec) -> (f64, f64) {
    let (s, c) = drive.steering.sin_cos();
    (drive.amplitude * s, drive.amplitude * c)
}

fn receiver_impedance(rx: &ReceiverModel, omega: f64) -> Result<Complex64> {
    let z = rx.impedance(omega);
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(Error::Singular(format!("receiver impedance is {z}")));
    }
    Ok(z)
}

/// Receiver current from the closed form
/// `I_C = jw I sqrt(M_AC^2 + M_BC^2) sin(theta + atan(M_BC / M_AC)) / Z_rx`.
pub fn receiver_current(
    drive: &DriveSpec,
    couplings: &Couplings,
    rx: &ReceiverModel,
) -> Result<Complex64> {
    let omega = drive.angular_frequency;
    let theta = drive.effective_steering()?;
    let z = receiver_impedance(rx, omega)?;
    Ok(J * omega * drive.amplitude * couplings.steered(theta) / z)
}

/// `P_in = I^2 R + |I_C|^2 Re(Z_rx)`: copper loss in both transmitters plus
/// what the receiver dissipates.
pub fn input_power(
    drive: &DriveSpec,
    couplings: &Couplings,
    rx: &ReceiverModel,
    tx: &TxCoil,
) -> Result<f64> {
    let i_c = receiver_current(drive, couplings, rx)?;
    Ok(drive.amplitude.powi(2) * tx.resistance + i_c.norm_sqr() * rx.dissipative_resistance())
}

/// Transmitter voltages including the reflected receiver term,
/// `U_A = I [(R + jX) sin(theta) + w^2 M_AC S / Z_rx]` and likewise for B,
/// where `S = M_AC sin(theta) + M_BC cos(theta)`.
pub fn transmitter_voltages(
    drive: &DriveSpec,
    couplings: &Couplings,
    rx: &ReceiverModel,
    tx: &TxCoil,
) -> Result<(Complex64, Complex64)> {
    let omega = drive.angular_frequency;
    let theta = drive.effective_steering()?;
    let z_rx = receiver_impedance(rx, omega)?;
    let z_tx = tx.impedance(omega);
    let s = couplings.projection(theta);
    let reflected = omega * omega * s / z_rx;
    let i = drive.amplitude;
    Ok((
        i * (z_tx * theta.sin() + couplings.m_ac * reflected),
        i * (z_tx * theta.cos() + couplings.m_bc * reflected),
    ))
}

/// Steady-state phasors of the two-transmitter system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasorSolution {
    pub angular_frequency: f64,
    pub z_tx_a: Complex64,
    pub z_tx_b: Complex64,
    pub z_rx: Complex64,
    pub couplings: Couplings,
    pub i_a: Complex64,
    pub i_b: Complex64,
    pub i_c: Complex64,
    pub u_a: Complex64,
    pub u_b: Complex64,
    /// `Re(U_A conj I_A) + Re(U_B conj I_B)`, W.
    pub p_in: f64,
}

impl PhasorSolution {
    fn assemble(
        omega: f64,
        z: [Complex64; 3],
        couplings: Couplings,
        currents: [Complex64; 3],
        voltages: [Complex64; 2],
    ) -> Self {
        let [i_a, i_b, i_c] = currents;
        let [u_a, u_b] = voltages;
        Self {
            angular_frequency: omega,
            z_tx_a: z[0],
            z_tx_b: z[1],
            z_rx: z[2],
            couplings,
            i_a,
            i_b,
            i_c,
            u_a,
            u_b,
            p_in: (u_a * i_a.conj()).re + (u_b * i_b.conj()).re,
        }
    }

    /// Sum of `|I|^2 Re(Z)` over all three branches.
    pub fn dissipated_power(&self) -> f64 {
        self.i_a.norm_sqr() * self.z_tx_a.re
            + self.i_b.norm_sqr() * self.z_tx_b.re
            + self.i_c.norm_sqr() * self.z_rx.re
    }

    /// Largest absolute residual of the three loop equations.
    pub fn kvl_residual(&self) -> f64 {
        let jw = J * self.angular_frequency;
        let Couplings { m_ac, m_bc } = self.couplings;
        let r1 = self.u_a + jw * m_ac * self.i_c - self.z_tx_a * self.i_a;
        let r2 = self.u_b + jw * m_bc * self.i_c - self.z_tx_b * self.i_b;
        let r3 = jw * m_ac * self.i_a + jw * m_bc * self.i_b - self.z_rx * self.i_c;
        r1.norm().max(r2.norm()).max(r3.norm())
    }

    /// Magnitude of the equivalent single-coil voltage, `sqrt(|U_A|^2 + |U_B|^2)`.
    pub fn combined_voltage(&self) -> f64 {
        (self.u_a.norm_sqr() + self.u_b.norm_sqr()).sqrt()
    }
}

fn solve3(m: Matrix3<Complex64>, rhs: Vector3<Complex64>) -> Result<Vector3<Complex64>> {
    let lu = m.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("coupled-circuit matrix is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("coupled-circuit solve produced non-finite values".into()));
    }
    Ok(x)
}

/// Voltage-driven solve of the three loop equations.
pub fn solve_full_system(
    u_a: Complex64,
    u_b: Complex64,
    couplings: &Couplings,
    rx: &ReceiverModel,
    tx: &[TxCoil; 2],
    omega: f64,
) -> Result<PhasorSolution> {
    ensure_positive("omega", omega)?;
    let z = [tx[0].impedance(omega), tx[1].impedance(omega), rx.impedance(omega)];
    let jw = J * omega;
    let zero = Complex64::new(0.0, 0.0);
    let m = Matrix3::new(
        z[0],
        zero,
        -jw * couplings.m_ac,
        zero,
        z[1],
        -jw * couplings.m_bc,
        -jw * couplings.m_ac,
        -jw * couplings.m_bc,
        z[2],
    );
    let x = solve3(m, Vector3::new(u_a, u_b, zero))?;
    Ok(PhasorSolution::assemble(
        omega,
        z,
        *couplings,
        [x[0], x[1], x[2]],
        [u_a, u_b],
    ))
}

/// Current-driven solve: with `I_A`, `I_B` imposed, the loop equations are
/// linear in `(U_A, U_B, I_C)` and are solved as a dense system.
pub fn solve_current_driven(
    drive: &DriveSpec,
    couplings: &Couplings,
    rx: &ReceiverModel,
    tx: &[TxCoil; 2],
) -> Result<PhasorSolution> {
    let omega = drive.angular_frequency;
    let (i_a, i_b) = drive.phasors()?;
    let z = [tx[0].impedance(omega), tx[1].impedance(omega), rx.impedance(omega)];
    let jw = J * omega;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let m = Matrix3::new(
        one,
        zero,
        jw * couplings.m_ac,
        zero,
        one,
        jw * couplings.m_bc,
        zero,
        zero,
        z[2],
    );
    let rhs = Vector3::new(
        z[0] * i_a,
        z[1] * i_b,
        jw * (couplings.m_ac * i_a + couplings.m_bc * i_b),
    );
    let x = solve3(m, rhs)?;
    Ok(PhasorSolution::assemble(
        omega,
        z,
        *couplings,
        [i_a, i_b, x[2]],
        [x[0], x[1]],
    ))
}

/// Operating point from the closed forms, with identical transmitters.
pub fn operating_point(
    drive: &DriveSpec,
    couplings: &Couplings,
    rx: &ReceiverModel,
    tx: &TxCoil,
) -> Result<PhasorSolution> {
    let omega = drive.angular_frequency;
    let (i_a, i_b) = drive.phasors()?;
    let i_c = receiver_current(drive, couplings, rx)?;
    let (u_a, u_b) = transmitter_voltages(drive, couplings, rx, tx)?;
    let z_tx = tx.impedance(omega);
    let mut sol = PhasorSolution::assemble(
        omega,
        [z_tx, z_tx, rx.impedance(omega)],
        *couplings,
        [i_a, i_b, i_c],
        [u_a, u_b],
    );
    sol.p_in = input_power(drive, couplings, rx, tx)?;
    Ok(sol)
}

/// Source of the single-coil reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingleCoilDrive {
    Voltage(Complex64),
    Current(Complex64),
}

/// Phasors of one transmitter coil coaxial with the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSolution {
    pub angular_frequency: f64,
    pub mutual: f64,
    pub z_tx: Complex64,
    pub z_rx: Complex64,
    pub u_i: Complex64,
    pub i_1: Complex64,
    pub i_2: Complex64,
    /// Mutual-inductance voltage on the transmitter, `U_i = Z_1 I_1 + u_p`.
    pub u_p: Complex64,
    /// Mutual-inductance voltage induced in the receiver, `u_s = Z_2 I_2`.
    pub u_s: Complex64,
    pub p_in: f64,
}

impl ReducedSolution {
    /// Reflected impedance `w^2 M^2 / Z_2`.
    pub fn reflected_impedance(&self) -> Complex64 {
        (self.angular_frequency * self.mutual).powi(2) / self.z_rx
    }
}

/// `I_1 = U_i / (Z_1 + w^2 M^2 / Z_2)`, `I_2 = jw M I_1 / Z_2`.
pub fn solve_single_coil(
    drive: SingleCoilDrive,
    mutual: f64,
    rx: &ReceiverModel,
    tx: &TxCoil,
    omega: f64,
) -> Result<ReducedSolution> {
    ensure_positive("omega", omega)?;
    if !mutual.is_finite() {
        return Err(Error::invalid("mutual inductance must be finite"));
    }
    let z_rx = receiver_impedance(rx, omega)?;
    let z_tx = tx.impedance(omega);
    let z_in = z_tx + (omega * mutual).powi(2) / z_rx;
    let (u_i, i_1) = match drive {
        SingleCoilDrive::Voltage(u) => {
            if z_in.norm() == 0.0 {
                return Err(Error::Singular("input impedance is zero".into()));
            }
            (u, u / z_in)
        }
        SingleCoilDrive::Current(i) => (z_in * i, i),
    };
    let i_2 = J * omega * mutual * i_1 / z_rx;
    Ok(ReducedSolution {
        angular_frequency: omega,
        mutual,
        z_tx,
        z_rx,
        u_i,
        i_1,
        i_2,
        u_p: -J * omega * mutual * i_2,
        u_s: J * omega * mutual * i_1,
        p_in: (u_i * i_1.conj()).re,
    })
}

/// Scale factors mapping the reduced model onto the two-transmitter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConstants {
    /// `U_A sin + U_B cos = K1 U_i`
    pub k1: f64,
    /// `I_C = K2 I_2`
    pub k2: f64,
    /// `M_AC sin + M_BC cos = K3 M`
    pub k3: f64,
    /// `I = K4 I_1`
    pub k4: f64,
    /// `R + jX = K5 (R_1 + jX_1)`
    pub k5: f64,
    /// `Z_rx = K6 Z_2`
    pub k6: f64,
}

pub const EQUIVALENCE_TOL: f64 = 1e-9;

pub fn equivalence_constants(
    full: &PhasorSolution,
    theta: f64,
    reduced: &ReducedSolution,
) -> Result<EquivalenceConstants> {
    equivalence_constants_with_tol(full, theta, reduced, EQUIVALENCE_TOL)
}

fn real_ratio(name: &str, num: Complex64, den: Complex64, tol: f64) -> Result<f64> {
    if den.norm() == 0.0 {
        return Err(Error::EquivalenceViolation(format!("{name}: zero denominator")));
    }
    let r = num / den;
    if !r.is_finite() || r.im.abs() > tol * r.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::EquivalenceViolation(format!("{name} = {r} is not real")));
    }
    Ok(r.re)
}

fn agree(name: &str, lhs: f64, rhs: f64, tol: f64) -> Result<()> {
    let scale = lhs.abs().max(rhs.abs());
    if (lhs - rhs).abs() <= tol * scale {
        Ok(())
    } else {
        Err(Error::EquivalenceViolation(format!("{name}: {lhs:e} vs {rhs:e}")))
    }
}

/// Computes K1..K6 and checks `K1 = K2 K3 = K4 K5` and `K3 K4 = K2 K6`,
/// the conditions under which the reduced loop equations are a scaled copy
/// of the steered two-transmitter equations.
pub fn equivalence_constants_with_tol(
    full: &PhasorSolution,
    theta: f64,
    reduced: &ReducedSolution,
    tol: f64,
) -> Result<EquivalenceConstants> {
    if (full.angular_frequency - reduced.angular_frequency).abs()
        > tol * full.angular_frequency
    {
        return Err(Error::EquivalenceViolation("operating frequencies differ".into()));
    }
    if (full.z_tx_a - full.z_tx_b).norm() > tol * full.z_tx_a.norm() {
        return Err(Error::EquivalenceViolation(
            "transmitters A and B are not identical".into(),
        ));
    }
    let (s, c) = theta.sin_cos();
    let i_eq = full.i_a * s + full.i_b * c;
    let skew = full.i_a * c - full.i_b * s;
    if skew.norm() > tol * i_eq.norm() {
        return Err(Error::EquivalenceViolation(format!(
            "transmitter currents are not steered at theta = {theta}"
        )));
    }
    let u_eq = full.u_a * s + full.u_b * c;
    let projection = Complex64::new(full.couplings.projection(theta), 0.0);

    let k = EquivalenceConstants {
        k1: real_ratio("K1", u_eq, reduced.u_i, tol)?,
        k2: real_ratio("K2", full.i_c, reduced.i_2, tol)?,
        k3: real_ratio("K3", projection, Complex64::new(reduced.mutual, 0.0), tol)?,
        k4: real_ratio("K4", i_eq, reduced.i_1, tol)?,
        k5: real_ratio("K5", full.z_tx_a, reduced.z_tx, tol)?,
        k6: real_ratio("K6", full.z_rx, reduced.z_rx, tol)?,
    };
    agree("K1 vs K2 K3", k.k1, k.k2 * k.k3, tol)?;
    agree("K1 vs K4 K5", k.k1, k.k4 * k.k5, tol)?;
    agree("K3 K4 vs K2 K6", k.k3 * k.k4, k.k2 * k.k6, tol)?;
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    const W: f64 = 2.0 * PI * 20e3;

    fn tx() -> TxCoil {
        TxCoil::resonant(0.1, 10e-6, W).unwrap()
    }
    fn coil(load: f64) -> ReceiverModel {
        ReceiverModel::coil(0.1, 10e-6, resonant_capacitance(10e-6, W), load).unwrap()
    }
    fn metal() -> ReceiverModel {
        ReceiverModel::metal(EddyImpedance {
            r_m: 1.5e-3,
            l_m: 2e-7,
        })
        .unwrap()
    }
    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }
    fn crel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm())
    }

    #[test]
    fn default_resonant_capacitance() {
        let c = resonant_capacitance(10e-6, W);
        assert!((c - 6.333e-6).abs() < 1e-9);
        let t = tx();
        assert!(t.reactance(W).abs() <= 1e-12 * W * t.inductance);
        assert!(t.check_resonance(W, 1e-12).is_ok());
        let printed = TxCoil::new(0.1, 10e-6, 6.6e-6).unwrap();
        assert!(printed.check_resonance(W, 1e-3).is_err());
    }

    #[test]
    fn decomposition() {
        let (a, b) = current_decomposition(&DriveSpec::new(W, 10.0, 0.0).unwrap());
        assert_eq!((a, b), (0.0, 10.0));
        let (a, b) = current_decomposition(&DriveSpec::new(W, 10.0, PI / 2.0).unwrap());
        assert!((a - 10.0).abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = current_decomposition(&DriveSpec::new(W, 10.0, FRAC_PI_4).unwrap());
        assert!((a - 7.0710678118654755).abs() < 1e-14 && (a - b).abs() < 1e-14);
        assert!(((a * a + b * b).sqrt() - 10.0).abs() < 1e-14);
    }

    #[test]
    fn receiver_current_nulls() {
        let d = DriveSpec::new(W, 5.0, 0.3).unwrap();
        let zero = Couplings::new(0.0, 0.0).unwrap();
        assert_eq!(receiver_current(&d, &zero, &coil(4.5)).unwrap().norm(), 0.0);
        // theta + atan(M_BC / M_AC) = 0 (mod pi): field orthogonal to the receiver.
        let c = Couplings::new(1e-6, -1e-6 * 0.3f64.tan()).unwrap();
        assert!(receiver_current(&d, &c, &coil(4.5)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn closed_forms_match_dense_solve() {
        let c = Couplings::new(0.7e-6, -0.25e-6).unwrap();
        for rx in [coil(1.5), coil(10.0), metal()] {
            for theta in [0.1, 1.3, 2.9, 4.4] {
                let d = DriveSpec::new(W, 7.0, theta).unwrap();
                let dense = solve_current_driven(&d, &c, &rx, &[tx(), tx()]).unwrap();
                let i_c = receiver_current(&d, &c, &rx).unwrap();
                assert!(crel(i_c, dense.i_c) < 1e-9);
                let (u_a, u_b) = transmitter_voltages(&d, &c, &rx, &tx()).unwrap();
                assert!(crel(u_a, dense.u_a) < 1e-9 && crel(u_b, dense.u_b) < 1e-9);
                let p = input_power(&d, &c, &rx, &tx()).unwrap();
                assert!(rel(p, dense.p_in) < 1e-9);
                assert!(rel(p, dense.dissipated_power()) < 1e-9);
            }
        }
    }

    #[test]
    fn decoupled_and_quadratic_power() {
        let zero = Couplings::new(0.0, 0.0).unwrap();
        let d = DriveSpec::new(W, 10.0, 0.8).unwrap();
        let p = input_power(&d, &zero, &coil(4.5), &tx()).unwrap();
        assert!(rel(p, 100.0 * 0.1) < 1e-15);
        let c = Couplings::new(0.5e-6, 0.4e-6).unwrap();
        let p1 = input_power(&d, &c, &metal(), &tx()).unwrap();
        let p2 = input_power(&d.with_amplitude(20.0), &c, &metal(), &tx()).unwrap();
        assert!(rel(p2, 4.0 * p1) < 1e-15);
    }

    #[test]
    fn voltages_at_resonance_without_coupling() {
        let zero = Couplings::new(0.0, 0.0).unwrap();
        let d = DriveSpec::new(W, 10.0, 0.6).unwrap();
        let (u_a, u_b) = transmitter_voltages(&d, &zero, &coil(4.5), &tx()).unwrap();
        assert!((u_a - Complex64::new(10.0 * 0.1 * 0.6f64.sin(), 0.0)).norm() < 1e-12);
        assert!((u_b - Complex64::new(10.0 * 0.1 * 0.6f64.cos(), 0.0)).norm() < 1e-12);
        // At the receiver null the reflected term vanishes too.
        let c = Couplings::new(1e-6, -1e-6 * 0.6f64.tan()).unwrap();
        let (u_a, _) = transmitter_voltages(&d, &c, &coil(4.5), &tx()).unwrap();
        assert!((u_a - Complex64::new(0.6f64.sin(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn voltage_driven_round_trip() {
        let c = Couplings::new(0.9e-6, 0.3e-6).unwrap();
        let d = DriveSpec::new(W, 4.0, 2.2).unwrap();
        for rx in [coil(1.5), metal()] {
            let (u_a, u_b) = transmitter_voltages(&d, &c, &rx, &tx()).unwrap();
            let sol = solve_full_system(u_a, u_b, &c, &rx, &[tx(), tx()], W).unwrap();
            let (i_a, i_b) = d.phasors().unwrap();
            assert!((sol.i_a - i_a).norm() < 1e-9 * d.amplitude);
            assert!((sol.i_b - i_b).norm() < 1e-9 * d.amplitude);
            assert!(sol.kvl_residual() < 1e-12 * sol.combined_voltage().max(1.0));
        }
    }

    #[test]
    fn zero_sources_give_zero_currents() {
        let c = Couplings::new(0.9e-6, 0.3e-6).unwrap();
        let z = Complex64::new(0.0, 0.0);
        let sol = solve_full_system(z, z, &c, &coil(4.5), &[tx(), tx()], W).unwrap();
        assert_eq!(sol.i_a.norm() + sol.i_b.norm() + sol.i_c.norm(), 0.0);
        assert_eq!(sol.p_in, 0.0);
    }

    #[test]
    fn singular_receiver() {
        let shorted = ReceiverModel::Metal { r_m: 0.0, l_m: 0.0 };
        let d = DriveSpec::new(W, 1.0, 0.5).unwrap();
        let c = Couplings::new(1e-6, 1e-6).unwrap();
        assert!(matches!(receiver_current(&d, &c, &shorted), Err(Error::Singular(_))));
        assert!(solve_single_coil(SingleCoilDrive::Voltage(Complex64::new(1.0, 0.0)), 1e-6, &shorted, &tx(), W).is_err());
    }

    #[test]
    fn anti_phase_drive_mirrors_steering() {
        let c = Couplings::new(0.8e-6, 0.2e-6).unwrap();
        let d = DriveSpec::new(W, 3.0, 0.7).unwrap().with_phase_offset(PI);
        let mirrored = DriveSpec::new(W, 3.0, -0.7).unwrap();
        let a = receiver_current(&d, &c, &coil(4.5)).unwrap();
        let b = receiver_current(&mirrored, &c, &coil(4.5)).unwrap();
        assert!(crel(a, b) < 1e-15);
        assert!(DriveSpec::new(W, 3.0, 0.7).unwrap().with_phase_offset(1.0).phasors().is_err());
    }

    #[test]
    fn single_coil_examples() {
        let u = Complex64::new(2.0, 0.0);
        let s = solve_single_coil(SingleCoilDrive::Voltage(u), 0.0, &coil(4.5), &tx(), W).unwrap();
        assert!((s.i_1 - u / 0.1).norm() < 1e-12);
        let s = solve_single_coil(SingleCoilDrive::Voltage(u), 5e-7, &metal(), &tx(), W).unwrap();
        assert!(s.reflected_impedance().re > 0.0);
        assert!(crel(s.u_i, s.z_tx * s.i_1 + s.u_p) < 1e-14);
        assert!(crel(s.u_s, s.z_rx * s.i_2) < 1e-14);
    }

    #[test]
    fn single_coil_matches_two_by_two_solve() {
        // Direct elimination of  U = Z1 I1 - jwM I2,  0 = -jwM I1 + Z2 I2  by Cramer's rule.
        let m = 6e-7;
        let u = Complex64::new(1.3, -0.4);
        let rx = coil(2.0);
        let z1 = tx().impedance(W);
        let z2 = rx.impedance(W);
        let off = -J * W * m;
        let det = z1 * z2 - off * off;
        let i1 = u * z2 / det;
        let i2 = -off * u / det;
        let s = solve_single_coil(SingleCoilDrive::Voltage(u), m, &rx, &tx(), W).unwrap();
        assert!(crel(s.i_1, i1) < 1e-12 && crel(s.i_2, i2) < 1e-12);
    }

    #[test]
    fn metal_reflection_weakens_with_coupling() {
        let u = Complex64::new(1.0, 0.0);
        let mut last = 0.0;
        for i in (1..=20).rev() {
            let m = 1e-7 * i as f64;
            let s = solve_single_coil(SingleCoilDrive::Voltage(u), m, &metal(), &tx(), W).unwrap();
            assert!(s.i_1.norm() > last);
            last = s.i_1.norm();
        }
    }

    fn reduced_for(full: &PhasorSolution, theta: f64, k3: f64, k4: f64, k6: f64, rx: &ReceiverModel) -> ReducedSolution {
        let k5 = k3 * k3 / k6;
        let tx1 = TxCoil::new(full.z_tx_a.re / k5, 10e-6 / k5, 1.0).unwrap();
        let tx1 = TxCoil {
            capacitance: 1.0 / (W * (W * tx1.inductance - full.z_tx_a.im / k5)),
            ..tx1
        };
        let rx2 = match *rx {
            ReceiverModel::Metal { r_m, l_m } => ReceiverModel::Metal { r_m: r_m / k6, l_m: l_m / k6 },
            ReceiverModel::Coil { resistance, inductance, capacitance, load } => ReceiverModel::Coil {
                resistance: resistance / k6,
                inductance: inductance / k6,
                capacitance: capacitance * k6,
                load: load / k6,
            },
        };
        let i1 = (full.i_a * theta.sin() + full.i_b * theta.cos()) / k4;
        let m = full.couplings.projection(theta) / k3;
        solve_single_coil(SingleCoilDrive::Current(i1), m, &rx2, &tx1, W).unwrap()
    }

    #[test]
    fn unit_equivalence() {
        let c = Couplings::new(0.6e-6, 0.45e-6).unwrap();
        let theta = 0.9;
        let d = DriveSpec::new(W, 5.0, theta).unwrap();
        let full = operating_point(&d, &c, &coil(4.5), &tx()).unwrap();
        let red = reduced_for(&full, theta, 1.0, 1.0, 1.0, &coil(4.5));
        let k = equivalence_constants(&full, theta, &red).unwrap();
        for v in [k.k1, k.k2, k.k3, k.k4, k.k5, k.k6] {
            assert!((v - 1.0).abs() < 1e-9, "{k:?}");
        }
    }

    #[test]
    fn doubling_source_scales_k1_only() {
        let c = Couplings::new(0.6e-6, 0.45e-6).unwrap();
        let theta = 0.9;
        let full = operating_point(&DriveSpec::new(W, 5.0, theta).unwrap(), &c, &metal(), &tx()).unwrap();
        let red = reduced_for(&full, theta, 1.0, 1.0, 1.0, &metal());
        let k = equivalence_constants(&full, theta, &red).unwrap();
        let full2 = operating_point(&DriveSpec::new(W, 10.0, theta).unwrap(), &c, &metal(), &tx()).unwrap();
        // Same reduced system: the amplitude-carrying ratios double, the
        // impedance and coupling ratios stay put.
        let kk = equivalence_constants(&full2, theta, &red).unwrap();
        assert!(rel(kk.k1, 2.0 * k.k1) < 1e-12);
        assert!(rel(kk.k2, 2.0 * k.k2) < 1e-12 && rel(kk.k4, 2.0 * k.k4) < 1e-12);
        assert!(rel(kk.k3, k.k3) < 1e-12 && rel(kk.k5, k.k5) < 1e-12 && rel(kk.k6, k.k6) < 1e-12);
    }

    #[test]
    fn inconsistent_reduction_is_rejected() {
        let c = Couplings::new(0.6e-6, 0.45e-6).unwrap();
        let theta = 0.4;
        let full = operating_point(&DriveSpec::new(W, 5.0, theta).unwrap(), &c, &coil(1.5), &tx()).unwrap();
        // K5 != K3^2 / K6 breaks the mapping.
        let red = reduced_for(&full, theta, 1.0, 1.0, 1.0, &coil(1.5));
        let wrong_tx = TxCoil::new(0.2, 10e-6, resonant_capacitance(10e-6, W)).unwrap();
        let bad = solve_single_coil(SingleCoilDrive::Current(red.i_1), red.mutual, &coil(1.5), &wrong_tx, W).unwrap();
        assert!(matches!(equivalence_constants(&full, theta, &bad), Err(Error::EquivalenceViolation(_))));
    }
}
