//! U-I and P-I characteristic curves swept over transmitter current.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{operating_point, Couplings, DriveSpec, ReceiverModel, TxCoil};
use crate::error::{ensure_non_negative, Error, Result};

/// Significant digits written for every CSV value.
pub const CSV_SIGNIFICANT_DIGITS: i32 = 12;

pub const CSV_HEADER: [&str; 4] = ["label", "i_tx_A", "u_tx_V", "p_in_W"];
pub const RAW_CSV_HEADER: [&str; 6] = ["label", "i_tx_A", "u_a_V", "u_b_V", "u_tx_V", "p_in_W"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverClass {
    Metal,
    Coil,
}

impl ReceiverClass {
    /// Class encoded in a curve label (`coil:...` or `metal:...`).
    pub fn from_label(label: &str) -> Option<Self> {
        match label.split(':').next() {
            Some("metal") => Some(Self::Metal),
            Some("coil") => Some(Self::Coil),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Metal => "metal",
            Self::Coil => "coil",
        }
    }
}

pub fn coil_label(load_ohm: f64) -> String {
    format!("coil:{load_ohm}ohm")
}

pub fn metal_label(material: &str, side_m: f64) -> String {
    format!("metal:{material}:{side_m:.2}m")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub i_min: f64,
    pub i_max: f64,
    pub steps: usize,
    /// Drive template; its amplitude is replaced at every point.
    pub drive: DriveSpec,
    pub receiver: ReceiverModel,
    pub couplings: Couplings,
    pub transmitter: TxCoil,
}

impl SweepSpec {
    pub fn new(
        i_min: f64,
        i_max: f64,
        steps: usize,
        drive: DriveSpec,
        receiver: ReceiverModel,
        couplings: Couplings,
        transmitter: TxCoil,
    ) -> Result<Self> {
        ensure_non_negative("i_min", i_min)?;
        if !(i_max.is_finite() && i_max > i_min) {
            return Err(Error::invalid(format!("need i_min < i_max, got {i_min} and {i_max}")));
        }
        if steps < 2 {
            return Err(Error::invalid("a sweep needs at least 2 steps"));
        }
        Ok(Self {
            i_min,
            i_max,
            steps,
            drive,
            receiver,
            couplings,
            transmitter,
        })
    }

    /// Evenly spaced currents, endpoints exact.
    pub fn currents(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..=n)
            .map(|k| {
                if k == n {
                    self.i_max
                } else {
                    self.i_min + (self.i_max - self.i_min) * k as f64 / n as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub i_tx: f64,
    pub u_tx: f64,
    pub p_in: f64,
}

/// Per-point record keeping each transmitter's voltage magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub i_tx: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub u_tx: f64,
    pub p_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl CharacteristicCurve {
    pub fn new(label: impl Into<String>, mut points: Vec<CurvePoint>) -> Result<Self> {
        for p in &points {
            if !(p.i_tx.is_finite() && p.u_tx.is_finite() && p.p_in.is_finite()) {
                return Err(Error::invalid("curve values must be finite"));
            }
            if p.i_tx < 0.0 || p.u_tx < 0.0 || p.p_in < 0.0 {
                return Err(Error::invalid("curve values must be non-negative"));
            }
        }
        points.sort_by(|a, b| a.i_tx.total_cmp(&b.i_tx));
        Ok(Self {
            label: label.into(),
            points,
        })
    }

    pub fn class(&self) -> Option<ReceiverClass> {
        ReceiverClass::from_label(&self.label)
    }

    pub fn currents(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.i_tx).collect()
    }
}

/// Operating points at the given currents with the drive template of `spec`.
pub fn sweep_points(spec: &SweepSpec, currents: &[f64]) -> Result<Vec<RawPoint>> {
    currents
        .iter()
        .map(|&i| {
            let drive = spec.drive.with_amplitude(i);
            let sol = operating_point(&drive, &spec.couplings, &spec.receiver, &spec.transmitter)
                .map_err(|e| match e {
                    Error::Singular(msg) => Error::Singular(format!("{msg} at i_tx = {i} A")),
                    other => other,
                })?;
            Ok(RawPoint {
                i_tx: i,
                u_a: sol.u_a.norm(),
                u_b: sol.u_b.norm(),
                u_tx: sol.combined_voltage(),
                p_in: sol.p_in,
            })
        })
        .collect()
}

pub fn sweep_raw(spec: &SweepSpec) -> Result<Vec<RawPoint>> {
    sweep_points(spec, &spec.currents())
}

pub fn to_curve(label: impl Into<String>, raw: &[RawPoint]) -> Result<CharacteristicCurve> {
    CharacteristicCurve::new(
        label,
        raw.iter()
            .map(|r| CurvePoint {
                i_tx: r.i_tx,
                u_tx: r.u_tx,
                p_in: r.p_in,
            })
            .collect(),
    )
}

pub fn sweep_curve(spec: &SweepSpec, label: impl Into<String>) -> Result<CharacteristicCurve> {
    to_curve(label, &sweep_raw(spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub relative_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(relative_sigma: f64, seed: u64) -> Result<Self> {
        ensure_non_negative("relative_sigma", relative_sigma)?;
        Ok(Self {
            relative_sigma,
            seed,
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Multiplies every `u_tx` and `p_in` by `1 + eps`, `eps ~ N(0, sigma)`,
/// drawn in point order (u first, then p). Factors are clamped at zero.
pub fn add_noise(curve: &CharacteristicCurve, noise: NoiseSpec) -> CharacteristicCurve {
    add_noise_stream(curve, noise, 0)
}

/// As [`add_noise`], drawing from an independent stream of the same seed.
pub fn add_noise_stream(
    curve: &CharacteristicCurve,
    noise: NoiseSpec,
    stream: u64,
) -> CharacteristicCurve {
    if noise.relative_sigma == 0.0 {
        return curve.clone();
    }
    let normal = Normal::new(0.0, noise.relative_sigma).expect("sigma validated");
    let mut rng = noise.rng(stream);
    let points = curve
        .points
        .iter()
        .map(|p| {
            let eu: f64 = normal.sample(&mut rng);
            let ep: f64 = normal.sample(&mut rng);
            CurvePoint {
                i_tx: p.i_tx,
                u_tx: p.u_tx * (1.0 + eu).max(0.0),
                p_in: p.p_in * (1.0 + ep).max(0.0),
            }
        })
        .collect();
    CharacteristicCurve {
        label: curve.label.clone(),
        points,
    }
}

/// Fixed-point decimal with at least [`CSV_SIGNIFICANT_DIGITS`] significant digits.
pub fn format_fixed(v: f64) -> String {
    if v == 0.0 {
        return format!("{:.*}", CSV_SIGNIFICANT_DIGITS as usize, 0.0);
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (CSV_SIGNIFICANT_DIGITS - 1 - magnitude).max(1) as usize;
    format!("{v:.decimals$}")
}

pub fn write_curves_csv<W: Write>(curves: &[CharacteristicCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.label.clone(),
                format_fixed(p.i_tx),
                format_fixed(p.u_tx),
                format_fixed(p.p_in),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw_csv<W: Write>(records: &[(String, Vec<RawPoint>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RAW_CSV_HEADER)?;
    for (label, points) in records {
        for p in points {
            w.write_record([
                label.clone(),
                format_fixed(p.i_tx),
                format_fixed(p.u_a),
                format_fixed(p.u_b),
                format_fixed(p.u_tx),
                format_fixed(p.p_in),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `label,i_tx_A,u_tx_V,p_in_W` rows, grouping by label in order of
/// first appearance.
pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<CharacteristicCurve>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "expected header {}, found {}",
            CSV_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut groups: Vec<(String, Vec<CurvePoint>)> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", row + 2, CSV_HEADER[k])))
        };
        let label = rec.get(0).unwrap_or("").to_string();
        let point = CurvePoint {
            i_tx: num(1)?,
            u_tx: num(2)?,
            p_in: num(3)?,
        };
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((label, vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|(label, pts)| CharacteristicCurve::new(label, pts))
        .collect()
}
