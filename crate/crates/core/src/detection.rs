//! Threshold curves in the U-I and P-I planes and the metal/coil verdict.
//!
//! Training curves are resampled onto a shared current grid, the upper
//! envelope of the metal curves and the lower envelope of the coil curves are
//! formed, and least-squares fits go through the envelope midpoints: a line
//! for U-I, a polynomial for P-I. A sample strictly below both fits is metal.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::characteristics::{CharacteristicCurve, ReceiverClass};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

pub const DEFAULT_DEGREE: usize = 2;
pub const DEFAULT_GATE_AMPS: f64 = 3.0;
/// Share of gated grid points at which overlapping envelopes are tolerated.
pub const MAX_OVERLAP_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    /// V/A
    pub slope: f64,
    /// V
    pub intercept: f64,
}

impl Line {
    pub fn eval(&self, i: f64) -> f64 {
        self.intercept + self.slope * i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdModel {
    pub u_line: Line,
    /// Ascending powers of current, W/A^n.
    pub p_poly: Vec<f64>,
    pub degree: usize,
    /// A
    pub i_min_gate: f64,
}

impl ThresholdModel {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::invalid("polynomial degree must be >= 1"));
        }
        if self.p_poly.len() != self.degree + 1 {
            return Err(Error::invalid(format!(
                "degree {} needs {} coefficients, found {}",
                self.degree,
                self.degree + 1,
                self.p_poly.len()
            )));
        }
        ensure_positive("i_min_gate", self.i_min_gate)?;
        let finite = self.u_line.slope.is_finite()
            && self.u_line.intercept.is_finite()
            && self.p_poly.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::invalid("threshold coefficients must be finite"));
        }
        Ok(())
    }

    pub fn u_threshold(&self, i: f64) -> f64 {
        self.u_line.eval(i)
    }

    pub fn p_threshold(&self, i: f64) -> f64 {
        self.p_poly.iter().rev().fold(0.0, |acc, c| acc * i + c)
    }

    pub fn with_gate(&self, i_min_gate: f64) -> Result<Self> {
        let m = Self {
            i_min_gate,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub degree: usize,
    pub i_min_gate: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            i_min_gate: DEFAULT_GATE_AMPS,
        }
    }
}

/// Curves resampled on the shared grid with the two class envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelopes {
    pub grid: Vec<f64>,
    pub metal_u_upper: Vec<f64>,
    pub coil_u_lower: Vec<f64>,
    pub metal_p_upper: Vec<f64>,
    pub coil_p_lower: Vec<f64>,
}

impl Envelopes {
    pub fn u_midpoints(&self) -> Vec<f64> {
        midpoints(&self.metal_u_upper, &self.coil_u_lower)
    }

    pub fn p_midpoints(&self) -> Vec<f64> {
        midpoints(&self.metal_p_upper, &self.coil_p_lower)
    }
}

fn midpoints(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Sorted union of all curve currents within the range every curve covers.
pub fn common_grid(curves: &[&CharacteristicCurve]) -> Result<Vec<f64>> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for c in curves {
        let (first, last) = match (c.points.first(), c.points.last()) {
            (Some(f), Some(l)) => (f.i_tx, l.i_tx),
            _ => return Err(Error::invalid(format!("curve '{}' has no points", c.label))),
        };
        lo = lo.max(first);
        hi = hi.min(last);
    }
    if !(lo < hi) {
        return Err(Error::invalid("training curves share no current range"));
    }
    let mut grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.i_tx))
        .filter(|&i| i >= lo && i <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Piecewise-linear interpolation of `(u_tx, p_in)` at current `i`.
pub fn resample(curve: &CharacteristicCurve, i: f64) -> Option<(f64, f64)> {
    let pts = &curve.points;
    let k = pts.partition_point(|p| p.i_tx < i);
    if k < pts.len() && pts[k].i_tx == i {
        return Some((pts[k].u_tx, pts[k].p_in));
    }
    if k == 0 || k == pts.len() {
        return None;
    }
    let (a, b) = (pts[k - 1], pts[k]);
    let t = (i - a.i_tx) / (b.i_tx - a.i_tx);
    Some((a.u_tx + t * (b.u_tx - a.u_tx), a.p_in + t * (b.p_in - a.p_in)))
}

pub fn envelopes(
    metal_curves: &[CharacteristicCurve],
    coil_curves: &[CharacteristicCurve],
) -> Result<Envelopes> {
    if metal_curves.is_empty() || coil_curves.is_empty() {
        return Err(Error::invalid("need at least one metal and one coil curve"));
    }
    let all: Vec<&CharacteristicCurve> = metal_curves.iter().chain(coil_curves).collect();
    let grid = common_grid(&all)?;
    let n = grid.len();
    let mut env = Envelopes {
        grid,
        metal_u_upper: vec![f64::NEG_INFINITY; n],
        coil_u_lower: vec![f64::INFINITY; n],
        metal_p_upper: vec![f64::NEG_INFINITY; n],
        coil_p_lower: vec![f64::INFINITY; n],
    };
    for (g, &i) in env.grid.iter().enumerate() {
        for c in metal_curves {
            let (u, p) = resample(c, i).expect("grid lies inside every curve");
            env.metal_u_upper[g] = env.metal_u_upper[g].max(u);
            env.metal_p_upper[g] = env.metal_p_upper[g].max(p);
        }
        for c in coil_curves {
            let (u, p) = resample(c, i).expect("grid lies inside every curve");
            env.coil_u_lower[g] = env.coil_u_lower[g].min(u);
            env.coil_p_lower[g] = env.coil_p_lower[g].min(p);
        }
    }
    Ok(env)
}

/// Ordinary least squares for ascending-power coefficients, solved by SVD on
/// the column-scaled Vandermonde matrix.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if x.len() < degree + 1 {
        return Err(Error::invalid(format!(
            "{} points cannot determine a degree-{degree} polynomial",
            x.len()
        )));
    }
    let span = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if span > 0.0 { span } else { 1.0 };
    let a = DMatrix::from_fn(x.len(), degree + 1, |r, c| (x[r] / scale).powi(c as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let tol = f64::EPSILON * x.len() as f64 * svd.singular_values.max();
    if svd.rank(tol) < degree + 1 {
        return Err(Error::Singular(
            "Vandermonde matrix is rank deficient (too few distinct currents)".into(),
        ));
    }
    let sol = svd
        .solve(&b, tol)
        .map_err(|e| Error::Singular(format!("least squares failed: {e}")))?;
    Ok(sol
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect())
}

fn check_separable(
    plane: &'static str,
    grid: &[f64],
    upper_metal: &[f64],
    lower_coil: &[f64],
    gate: f64,
) -> Result<()> {
    let mut gated = 0;
    let mut overlapping = 0;
    for ((&i, &m), &c) in grid.iter().zip(upper_metal).zip(lower_coil) {
        if i >= gate {
            gated += 1;
            if m >= c {
                overlapping += 1;
            }
        }
    }
    if gated == 0 {
        return Err(Error::invalid(format!(
            "no training currents at or above the {gate} A gate"
        )));
    }
    if overlapping as f64 >= MAX_OVERLAP_FRACTION * gated as f64 {
        return Err(Error::NonSeparable {
            plane,
            overlapping,
            gated,
        });
    }
    Ok(())
}

pub fn fit_thresholds(
    metal_curves: &[CharacteristicCurve],
    coil_curves: &[CharacteristicCurve],
    opts: FitOptions,
) -> Result<ThresholdModel> {
    if opts.degree < 1 {
        return Err(Error::invalid("polynomial degree must be >= 1"));
    }
    ensure_positive("gate", opts.i_min_gate)?;
    let env = envelopes(metal_curves, coil_curves)?;
    let gate = opts.i_min_gate;
    check_separable("U-I", &env.grid, &env.metal_u_upper, &env.coil_u_lower, gate)?;
    check_separable("P-I", &env.grid, &env.metal_p_upper, &env.coil_p_lower, gate)?;

    let line = polyfit(&env.grid, &env.u_midpoints(), 1)?;
    let p_poly = polyfit(&env.grid, &env.p_midpoints(), opts.degree)?;
    let model = ThresholdModel {
        u_line: Line {
            slope: line[1],
            intercept: line[0],
        },
        p_poly,
        degree: opts.degree,
        i_min_gate: gate,
    };
    model.validate()?;
    Ok(model)
}

/// Splits labelled curves by the class encoded in their labels.
pub fn split_by_class(
    curves: &[CharacteristicCurve],
) -> Result<(Vec<CharacteristicCurve>, Vec<CharacteristicCurve>)> {
    let mut metal = Vec::new();
    let mut coil = Vec::new();
    for c in curves {
        match c.class() {
            Some(ReceiverClass::Metal) => metal.push(c.clone()),
            Some(ReceiverClass::Coil) => coil.push(c.clone()),
            None => {
                return Err(Error::invalid(format!(
                    "label '{}' is neither coil:... nor metal:...",
                    c.label
                )))
            }
        }
    }
    Ok((metal, coil))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub i_tx: f64,
    pub u_tx: f64,
    pub p_in: f64,
}

impl Sample {
    pub fn new(i_tx: f64, u_tx: f64, p_in: f64) -> Result<Self> {
        ensure_non_negative("i_tx", i_tx)?;
        ensure_non_negative("u_tx", u_tx)?;
        ensure_non_negative("p_in", p_in)?;
        Ok(Self { i_tx, u_tx, p_in })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

impl Side {
    fn of(value: f64, threshold: f64) -> Self {
        if value < threshold {
            Self::Below
        } else {
            Self::Above
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Metal,
    Coil,
    Indeterminate,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Metal => "metal",
            Self::Coil => "coil",
            Self::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub u_test: Side,
    pub p_test: Side,
    pub gated: bool,
}

/// Both tests are always evaluated; below the gate the decision is
/// indeterminate regardless.
pub fn classify(sample: &Sample, model: &ThresholdModel) -> Verdict {
    let u_test = Side::of(sample.u_tx, model.u_threshold(sample.i_tx));
    let p_test = Side::of(sample.p_in, model.p_threshold(sample.i_tx));
    let gated = sample.i_tx < model.i_min_gate;
    let decision = match (gated, u_test, p_test) {
        (true, _, _) => Decision::Indeterminate,
        (false, Side::Below, Side::Below) => Decision::Metal,
        (false, Side::Above, Side::Above) => Decision::Coil,
        _ => Decision::Indeterminate,
    };
    Verdict {
        decision,
        u_test,
        p_test,
        gated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub label: String,
    pub class: ReceiverClass,
    pub sample: Sample,
}

impl LabeledSample {
    /// Class taken from the label prefix.
    pub fn from_label(label: impl Into<String>, sample: Sample) -> Result<Self> {
        let label = label.into();
        let class = ReceiverClass::from_label(&label)
            .ok_or_else(|| Error::invalid(format!("label '{label}' carries no class")))?;
        Ok(Self {
            label,
            class,
            sample,
        })
    }
}

/// Every point of every curve as a labelled sample.
pub fn samples_from_curves(curves: &[CharacteristicCurve]) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for c in curves {
        for p in &c.points {
            out.push(LabeledSample::from_label(
                c.label.clone(),
                Sample::new(p.i_tx, p.u_tx, p.p_in)?,
            )?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub class: ReceiverClass,
    pub i_tx: f64,
    pub u_tx: f64,
    pub u_threshold: f64,
    pub p_in: f64,
    pub p_threshold: f64,
    pub verdict: Verdict,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub total: usize,
    pub as_metal: usize,
    pub as_coil: usize,
    pub indeterminate: usize,
    pub gated: usize,
}

impl ClassCounts {
    fn add(&mut self, v: &Verdict) {
        self.total += 1;
        match v.decision {
            Decision::Metal => self.as_metal += 1,
            Decision::Coil => self.as_coil += 1,
            Decision::Indeterminate => self.indeterminate += 1,
        }
        if v.gated {
            self.gated += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub total: usize,
    pub decidable: usize,
    pub correct: usize,
    pub indeterminate: usize,
    /// `None` when no sample was decidable.
    pub accuracy: Option<f64>,
    pub no_decidable_samples: bool,
    pub metal: ClassCounts,
    pub coil: ClassCounts,
    pub rows: Vec<ReportRow>,
}

pub fn evaluate_batch(samples: &[LabeledSample], model: &ThresholdModel) -> Result<BatchReport> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample batch"));
    }
    let mut metal = ClassCounts::default();
    let mut coil = ClassCounts::default();
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let v = classify(&s.sample, model);
        match s.class {
            ReceiverClass::Metal => metal.add(&v),
            ReceiverClass::Coil => coil.add(&v),
        }
        let correct = match (v.decision, s.class) {
            (Decision::Indeterminate, _) => None,
            (Decision::Metal, c) => Some(c == ReceiverClass::Metal),
            (Decision::Coil, c) => Some(c == ReceiverClass::Coil),
        };
        rows.push(ReportRow {
            label: s.label.clone(),
            class: s.class,
            i_tx: s.sample.i_tx,
            u_tx: s.sample.u_tx,
            u_threshold: model.u_threshold(s.sample.i_tx),
            p_in: s.sample.p_in,
            p_threshold: model.p_threshold(s.sample.i_tx),
            verdict: v,
            correct,
        });
    }
    let decidable = rows.iter().filter(|r| r.correct.is_some()).count();
    let correct = rows.iter().filter(|r| r.correct == Some(true)).count();
    Ok(BatchReport {
        total: rows.len(),
        decidable,
        correct,
        indeterminate: rows.len() - decidable,
        accuracy: (decidable > 0).then(|| correct as f64 / decidable as f64),
        no_decidable_samples: decidable == 0,
        metal,
        coil,
        rows,
    })
}

impl BatchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_table(&self) -> String {
        let mut t = String::new();
        let side = |s: Side| match s {
            Side::Below => "below",
            Side::Above => "above",
        };
        let _ = writeln!(
            t,
            "{:<18} {:>6} {:>8} {:>12} {:>12} {:>12} {:>12} {:>6} {:>6} {:>14}",
            "label", "class", "i_tx_A", "u_tx_V", "u_thr_V", "p_in_W", "p_thr_W", "u", "p", "verdict"
        );
        for r in &self.rows {
            let verdict = if r.verdict.gated {
                format!("{} (gated)", r.verdict.decision.as_str())
            } else {
                r.verdict.decision.as_str().to_string()
            };
            let _ = writeln!(
                t,
                "{:<18} {:>6} {:>8.3} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>6} {:>6} {:>14}",
                r.label,
                r.class.as_str(),
                r.i_tx,
                r.u_tx,
                r.u_threshold,
                r.p_in,
                r.p_threshold,
                side(r.verdict.u_test),
                side(r.verdict.p_test),
                verdict
            );
        }
        let _ = writeln!(t);
        for (name, c) in [("metal", &self.metal), ("coil", &self.coil)] {
            let _ = writeln!(
                t,
                "{name:<6} total {:>4}  metal {:>4}  coil {:>4}  indeterminate {:>4} (gated {})",
                c.total, c.as_metal, c.as_coil, c.indeterminate, c.gated
            );
        }
        match self.accuracy {
            Some(a) => {
                let _ = writeln!(
                    t,
                    "accuracy {:.4} ({} of {} decidable, {} indeterminate)",
                    a, self.correct, self.decidable, self.indeterminate
                );
            }
            None => {
                let _ = writeln!(t, "no decidable samples ({} indeterminate)", self.indeterminate);
            }
        }
        t
    }
}
