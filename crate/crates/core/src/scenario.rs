//! TOML scenarios: geometry, components, receivers, sweep, noise and
//! detection settings, with every key carrying its unit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::characteristics::{
    add_noise_stream, coil_label, metal_label, sweep_points, to_curve, CharacteristicCurve,
    NoiseSpec, RawPoint, ReceiverClass, SweepSpec,
};
use crate::circuit::{
    angular_frequency, Couplings, DriveSpec, ReceiverModel, TxCoil, DEFAULT_COIL_INDUCTANCE,
    DEFAULT_COIL_RESISTANCE,
};
use crate::detection::{FitOptions, LabeledSample, Sample};
use crate::eddy::{plate_impedance_with, EddyGeometry, EddyOptions, EddyReport, MetalMaterial};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::magnetics::{
    mutual_inductance_coil_plate, mutual_inductance_neumann, CoaxialPair, ReceiverPose, SquareLoop,
};
use crate::materials::MaterialDb;

pub const PAPER_REPRO: &str = "paper-repro";
const PAPER_REPRO_TOML: &str = include_str!("../scenarios/paper-repro.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Material table; relative paths resolve against the scenario file.
    #[serde(default)]
    pub materials_db: Option<PathBuf>,
    pub transmitter: CoilSection,
    pub operating: OperatingSection,
    pub receiver_coil: ReceiverCoilSection,
    pub plates: PlatesSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub eddy: EddySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilSection {
    pub half_side_m: f64,
    pub turns: u32,
    #[serde(default = "default_resistance")]
    pub resistance_ohm: f64,
    #[serde(default = "default_inductance")]
    pub inductance_h: f64,
    #[serde(default)]
    pub capacitance_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingSection {
    pub frequency_hz: f64,
    pub receiver_distance_m: f64,
    pub receiver_azimuth_rad: f64,
    /// Defaults to the receiver azimuth.
    #[serde(default)]
    pub steering_rad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverCoilSection {
    pub half_side_m: f64,
    pub turns: u32,
    #[serde(default = "default_resistance")]
    pub resistance_ohm: f64,
    #[serde(default = "default_inductance")]
    pub inductance_h: f64,
    #[serde(default)]
    pub capacitance_f: Option<f64>,
    pub loads_ohm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatesSection {
    pub materials: Vec<String>,
    pub side_lengths_m: Vec<f64>,
    /// Defaults to the receiver distance.
    #[serde(default)]
    pub distance_m: Option<f64>,
    /// Per-material relative permeability overrides.
    #[serde(default)]
    pub rel_permeability: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub i_min_a: f64,
    pub i_max_a: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub relative_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            relative_sigma: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub degree: usize,
    pub gate_amps: f64,
    pub test_currents_a: Vec<f64>,
    #[serde(default)]
    pub below_gate_current_a: Option<f64>,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            degree: 2,
            gate_amps: 3.0,
            test_currents_a: vec![3.0, 6.0, 9.0],
            below_gate_current_a: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EddySection {
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub tail_tol: Option<f64>,
    #[serde(default)]
    pub k_max_per_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// A metal plate facing the transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateSpec {
    pub material: MetalMaterial,
    pub side_m: f64,
    pub distance_m: f64,
}

impl PlateSpec {
    pub fn half_side(&self) -> f64 {
        0.5 * self.side_m
    }

    pub fn label(&self) -> String {
        metal_label(&self.material.name, self.side_m)
    }
}

/// One receiver of the scenario with its circuit model and couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverCase {
    pub label: String,
    pub class: ReceiverClass,
    pub model: ReceiverModel,
    /// Coaxial coupling magnitude, H.
    pub mutual: f64,
    pub couplings: Couplings,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub materials: MaterialDb,
    pub transmitter_loop: SquareLoop,
    pub transmitter: TxCoil,
    pub receiver_loop: SquareLoop,
    pub pose: ReceiverPose,
    pub omega: f64,
    pub plates: Vec<PlateSpec>,
    pub eddy_options: EddyOptions,
}

impl Scenario {
    pub fn paper_repro() -> Self {
        Self::from_toml_str(PAPER_REPRO_TOML, None).expect("bundled scenario is valid")
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[PAPER_REPRO]
    }

    /// A bundled scenario name or a path to a TOML file.
    pub fn resolve(arg: &str) -> Result<Self> {
        if arg == PAPER_REPRO {
            return Ok(Self::paper_repro());
        }
        Self::load(Path::new(arg))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::NotFound(format!("scenario '{}': {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file, base_dir)
    }

    pub fn from_file(file: ScenarioFile, base_dir: Option<&Path>) -> Result<Self> {
        let materials = match &file.materials_db {
            Some(p) => {
                let path = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                MaterialDb::load(&path).map_err(|e| match e {
                    Error::Io(io) => {
                        Error::NotFound(format!("material database '{}': {io}", path.display()))
                    }
                    other => other,
                })?
            }
            None => MaterialDb::builtin(),
        };
        Self::build(file, materials)
    }

    /// Validates `file` against `materials` and every module invariant.
    pub fn build(file: ScenarioFile, materials: MaterialDb) -> Result<Self> {
        let op = &file.operating;
        ensure_positive("operating.frequency_hz", op.frequency_hz)?;
        let omega = angular_frequency(op.frequency_hz);
        let pose = ReceiverPose::new(op.receiver_distance_m, op.receiver_azimuth_rad)
            .map_err(|e| context("operating.receiver_distance_m", e))?;

        let tx = &file.transmitter;
        let transmitter_loop =
            SquareLoop::new(tx.half_side_m, tx.turns).map_err(|e| context("transmitter", e))?;
        let transmitter = branch(tx.resistance_ohm, tx.inductance_h, tx.capacitance_f, omega)
            .map_err(|e| context("transmitter", e))?;

        let rc = &file.receiver_coil;
        let receiver_loop =
            SquareLoop::new(rc.half_side_m, rc.turns).map_err(|e| context("receiver_coil", e))?;
        branch(rc.resistance_ohm, rc.inductance_h, rc.capacitance_f, omega)
            .map_err(|e| context("receiver_coil", e))?;
        for &load in &rc.loads_ohm {
            ensure_positive("receiver_coil.loads_ohm", load)?;
        }

        let pl = &file.plates;
        let distance = pl.distance_m.unwrap_or(op.receiver_distance_m);
        ensure_positive("plates.distance_m", distance)?;
        for name in pl.rel_permeability.keys() {
            if !pl.materials.iter().any(|m| m.eq_ignore_ascii_case(name)) {
                return Err(Error::invalid(format!(
                    "plates.rel_permeability: '{name}' is not among plates.materials"
                )));
            }
        }
        let mut plates = Vec::new();
        for name in &pl.materials {
            let mut material = materials.get(name)?;
            if let Some((_, &mu)) = pl
                .rel_permeability
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
            {
                material = material.with_rel_permeability(mu)?;
            }
            for &side in &pl.side_lengths_m {
                ensure_positive("plates.side_lengths_m", side)?;
                plates.push(PlateSpec {
                    material: material.clone(),
                    side_m: side,
                    distance_m: distance,
                });
            }
        }
        if rc.loads_ohm.is_empty() && plates.is_empty() {
            return Err(Error::invalid("scenario defines no receivers"));
        }

        let sw = &file.sweep;
        ensure_non_negative("sweep.i_min_a", sw.i_min_a)?;
        if !(sw.i_max_a.is_finite() && sw.i_max_a > sw.i_min_a) {
            return Err(Error::invalid("sweep: need i_min_a < i_max_a"));
        }
        if sw.steps < 2 {
            return Err(Error::invalid("sweep.steps must be >= 2"));
        }
        NoiseSpec::new(file.noise.relative_sigma, file.noise.seed)
            .map_err(|e| context("noise", e))?;

        let det = &file.detection;
        if det.degree < 1 {
            return Err(Error::invalid("detection.degree must be >= 1"));
        }
        ensure_positive("detection.gate_amps", det.gate_amps)?;
        for &i in det.test_currents_a.iter().chain(&det.below_gate_current_a) {
            ensure_non_negative("detection test current", i)?;
        }

        let mut eddy_options = EddyOptions::default();
        if let Some(v) = file.eddy.rel_tol {
            ensure_positive("eddy.rel_tol", v)?;
            eddy_options.rel_tol = v;
        }
        if let Some(v) = file.eddy.tail_tol {
            ensure_positive("eddy.tail_tol", v)?;
            eddy_options.tail_tol = v;
        }
        if let Some(v) = file.eddy.k_max_per_m {
            ensure_positive("eddy.k_max_per_m", v)?;
            eddy_options.k_max_limit = v;
        }

        Ok(Self {
            file,
            materials,
            transmitter_loop,
            transmitter,
            receiver_loop,
            pose,
            omega,
            plates,
            eddy_options,
        })
    }

    /// Steering angle of the drive; pinned to the receiver azimuth unless set.
    pub fn steering(&self) -> f64 {
        self.file.operating.steering_rad.unwrap_or(self.pose.azimuth)
    }

    pub fn drive(&self, amplitude: f64) -> Result<DriveSpec> {
        DriveSpec::new(self.omega, amplitude, self.steering())
    }

    pub fn coil_pair(&self) -> Result<CoaxialPair> {
        CoaxialPair::new(self.transmitter_loop, self.receiver_loop, self.pose.distance)
    }

    /// Transmitter/receiver-coil coupling from the Neumann integral, H.
    pub fn coil_coupling(&self) -> Result<f64> {
        mutual_inductance_neumann(&self.coil_pair()?)
    }

    /// Transmitter/plate coupling from the closed form, H.
    pub fn plate_coupling(&self, plate: &PlateSpec) -> Result<f64> {
        mutual_inductance_coil_plate(&self.transmitter_loop, plate.half_side(), plate.distance_m)
    }

    pub fn eddy_geometry(&self, plate: &PlateSpec) -> Result<EddyGeometry> {
        EddyGeometry::new(
            plate.half_side(),
            self.transmitter_loop.turns(),
            plate.distance_m,
            self.omega,
        )
    }

    pub fn plate_impedance(&self, plate: &PlateSpec) -> Result<EddyReport> {
        plate_impedance_with(&self.eddy_geometry(plate)?, &plate.material, self.eddy_options)
    }

    pub fn coil_model(&self, load: f64) -> Result<ReceiverModel> {
        let rc = &self.file.receiver_coil;
        let c = rc
            .capacitance_f
            .unwrap_or_else(|| crate::circuit::resonant_capacitance(rc.inductance_h, self.omega));
        ReceiverModel::coil(rc.resistance_ohm, rc.inductance_h, c, load)
    }

    /// Coil receivers first (in load order), then plates (material-major).
    pub fn receivers(&self) -> Result<Vec<ReceiverCase>> {
        let azimuth = self.pose.azimuth;
        let mut out = Vec::new();
        if !self.file.receiver_coil.loads_ohm.is_empty() {
            let m = self.coil_coupling()?;
            for &load in &self.file.receiver_coil.loads_ohm {
                out.push(ReceiverCase {
                    label: coil_label(load),
                    class: ReceiverClass::Coil,
                    model: self.coil_model(load)?,
                    mutual: m,
                    couplings: Couplings::from_pose(m, azimuth),
                });
            }
        }
        for plate in &self.plates {
            let m = self.plate_coupling(plate)?;
            let z = self.plate_impedance(plate)?.impedance;
            out.push(ReceiverCase {
                label: plate.label(),
                class: ReceiverClass::Metal,
                model: ReceiverModel::metal(z)?,
                mutual: m,
                couplings: Couplings::from_pose(m, azimuth),
            });
        }
        Ok(out)
    }

    pub fn sweep_spec(&self, case: &ReceiverCase) -> Result<SweepSpec> {
        let sw = &self.file.sweep;
        SweepSpec::new(
            sw.i_min_a,
            sw.i_max_a,
            sw.steps,
            self.drive(0.0)?,
            case.model,
            case.couplings,
            self.transmitter,
        )
    }

    /// Noiseless sweeps with both transmitter voltages kept.
    pub fn raw_sweeps(&self, cases: &[ReceiverCase]) -> Result<Vec<(String, Vec<RawPoint>)>> {
        cases
            .iter()
            .map(|c| {
                let spec = self.sweep_spec(c)?;
                Ok((c.label.clone(), sweep_points(&spec, &spec.currents())?))
            })
            .collect()
    }

    /// Noiseless characteristic curves of every receiver.
    pub fn curves(&self, cases: &[ReceiverCase]) -> Result<Vec<CharacteristicCurve>> {
        self.raw_sweeps(cases)?
            .iter()
            .map(|(label, raw)| to_curve(label.clone(), raw))
            .collect()
    }

    pub fn noise(&self, seed: Option<u64>) -> NoiseSpec {
        NoiseSpec {
            relative_sigma: self.file.noise.relative_sigma,
            seed: seed.unwrap_or(self.file.noise.seed),
        }
    }

    /// Noisy copies of `curves`, each on its own random stream.
    pub fn noisy_curves(
        &self,
        curves: &[CharacteristicCurve],
        seed: Option<u64>,
    ) -> Vec<CharacteristicCurve> {
        let noise = self.noise(seed);
        curves
            .iter()
            .enumerate()
            .map(|(k, c)| add_noise_stream(c, noise, k as u64))
            .collect()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            degree: self.file.detection.degree,
            i_min_gate: self.file.detection.gate_amps,
        }
    }

    /// Test currents, with the below-gate current (if any) last.
    pub fn test_currents(&self) -> Vec<f64> {
        let det = &self.file.detection;
        det.test_currents_a
            .iter()
            .chain(&det.below_gate_current_a)
            .copied()
            .collect()
    }

    /// Noisy samples of every receiver at the test currents. Streams are
    /// offset past those used by [`Scenario::noisy_curves`].
    pub fn test_samples(
        &self,
        cases: &[ReceiverCase],
        seed: Option<u64>,
    ) -> Result<Vec<LabeledSample>> {
        let noise = self.noise(seed);
        let currents = self.test_currents();
        let mut out = Vec::new();
        for (k, case) in cases.iter().enumerate() {
            let spec = self.sweep_spec(case)?;
            let clean = to_curve(case.label.clone(), &sweep_points(&spec, &currents)?)?;
            let noisy = add_noise_stream(&clean, noise, (cases.len() + k) as u64);
            for p in &noisy.points {
                out.push(LabeledSample {
                    label: case.label.clone(),
                    class: case.class,
                    sample: Sample::new(p.i_tx, p.u_tx, p.p_in)?,
                });
            }
        }
        Ok(out)
    }

    pub fn output_dir(&self) -> &Path {
        &self.file.output.dir
    }
}

fn default_resistance() -> f64 {
    DEFAULT_COIL_RESISTANCE
}

fn default_inductance() -> f64 {
    DEFAULT_COIL_INDUCTANCE
}

fn branch(r: f64, l: f64, c: Option<f64>, omega: f64) -> Result<TxCoil> {
    match c {
        Some(c) => TxCoil::new(r, l, c),
        None => TxCoil::resonant(r, l, omega),
    }
}

fn context(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{section}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_loads() {
        let s = Scenario::paper_repro();
        assert_eq!(s.plates.len(), 6);
        assert_eq!(s.plates[0].label(), "metal:Fe:0.10m");
        assert!(s.transmitter.resonance_mismatch(s.omega) < 1e-12);
        assert_eq!(s.steering(), s.pose.azimuth);
        assert_eq!(s.test_currents(), vec![3.0, 6.0, 9.0, 0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = PAPER_REPRO_TOML.replace("[sweep]", "[sweep]\nstep_size = 1");
        assert!(matches!(Scenario::from_toml_str(&text, None), Err(Error::Parse(_))));
    }

    #[test]
    fn zero_distance_is_invalid() {
        let text = PAPER_REPRO_TOML.replace("receiver_distance_m = 0.20", "receiver_distance_m = 0.0");
        assert!(matches!(Scenario::from_toml_str(&text, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unknown_material() {
        let text = PAPER_REPRO_TOML.replace("\"Al\"", "\"Unobtainium\"");
        assert!(matches!(Scenario::from_toml_str(&text, None), Err(Error::NotFound(_))));
    }

    #[test]
    fn permeability_override() {
        let text = PAPER_REPRO_TOML.replace(
            "side_lengths_m = [0.1, 0.2]",
            "side_lengths_m = [0.1, 0.2]\nrel_permeability = { Fe = 200.0 }",
        );
        let s = Scenario::from_toml_str(&text, None).unwrap();
        assert_eq!(s.plates[0].material.rel_permeability, 200.0);
        assert_eq!(s.plates[2].material.rel_permeability, 1.0);
    }

    #[test]
    fn component_defaults() {
        let text = PAPER_REPRO_TOML
            .replace("resistance_ohm = 0.0045\n", "")
            .replace("inductance_h = 10.0e-6\n", "");
        let s = Scenario::from_toml_str(&text, None).unwrap();
        assert_eq!(s.transmitter.resistance, 0.1);
        assert_eq!(s.transmitter.inductance, 10e-6);
        assert_eq!(s.file.receiver_coil.resistance_ohm, 0.1);
    }

    #[test]
    fn printed_capacitance_is_off_resonance() {
        let text = PAPER_REPRO_TOML.replace("# capacitance_f = 6.6e-6", "capacitance_f = 6.6e-6");
        let s = Scenario::from_toml_str(&text, None).unwrap();
        assert!(s.transmitter.resonance_mismatch(s.omega) > 0.04);
    }
}
