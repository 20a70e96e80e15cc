use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use wptmod::characteristics::{
    format_fixed, read_curves_csv, write_curves_csv, write_raw_csv, CharacteristicCurve,
};
use wptmod::detection::{
    evaluate_batch, fit_thresholds, samples_from_curves, split_by_class, LabeledSample,
    ThresholdModel,
};
use wptmod::magnetics::{
    mutual_inductance_coil_coil_closed, mutual_inductance_coil_plate,
    mutual_inductance_coil_plate_numeric, mutual_inductance_neumann, CoaxialPair, SquareLoop,
    PLATE_QUADRATURE_PANELS,
};
use wptmod::materials::{MaterialDb, MaterialEntry};
use wptmod::scenario::Scenario;
use wptmod::Error;

use crate::Common;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_CONVERGENCE: u8 = 4;
pub const EXIT_NON_SEPARABLE: u8 = 5;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Convergence { .. }) => EXIT_CONVERGENCE,
        Some(Error::NonSeparable { .. }) => EXIT_NON_SEPARABLE,
        Some(Error::Io(_) | Error::Csv(_) | Error::Json(_)) => EXIT_FAILURE,
        Some(_) => EXIT_VALIDATION,
        None => EXIT_FAILURE,
    }
}

fn load(common: &Common) -> Result<Scenario> {
    let mut s = Scenario::resolve(&common.scenario)
        .with_context(|| format!("loading scenario '{}'", common.scenario))?;
    if let Some(seed) = common.seed {
        s.file.noise.seed = seed;
    }
    if let Some(out) = &common.out {
        s.file.output.dir = out.clone();
    }
    if let Some(d) = common.degree {
        s.file.detection.degree = d;
    }
    if let Some(g) = common.gate_amps {
        s.file.detection.gate_amps = g;
    }
    // Re-validate with the overrides applied.
    Ok(Scenario::build(s.file, s.materials)?)
}

fn out_dir(s: &Scenario) -> Result<PathBuf> {
    let dir = s.output_dir().to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn materials(db: Option<PathBuf>, name: Option<String>, add: Option<String>) -> Result<()> {
    let mut table = match &db {
        Some(p) if add.is_some() && !p.exists() => MaterialDb::from_toml_str("")?,
        Some(p) => MaterialDb::load(p)
            .map_err(|e| match e {
                Error::Io(io) => Error::NotFound(format!("material database '{}': {io}", p.display())),
                other => other,
            })
            .context("loading material database")?,
        None => MaterialDb::builtin(),
    };
    if let (Some(spec), Some(path)) = (&add, &db) {
        let parts: Vec<&str> = spec.split(':').collect();
        let [n, sigma, mu] = parts[..] else {
            return Err(Error::InvalidInput(format!(
                "--add expects NAME:CONDUCTIVITY:REL_PERMEABILITY, got '{spec}'"
            ))
            .into());
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("--add: '{v}': {e}")))
        };
        table.upsert(MaterialEntry {
            name: n.to_string(),
            long_name: None,
            conductivity_s_per_m: num(sigma)?,
            rel_permeability: num(mu)?,
            rel_permeability_range: None,
        })?;
        table.save(path)?;
    }
    let entries: Vec<&MaterialEntry> = match &name {
        Some(n) => vec![table.entry(n)?],
        None => table.entries().iter().collect(),
    };
    let mut t = String::new();
    writeln!(t, "{:<6} {:<10} {:>18} {:>10}  note", "name", "long_name", "conductivity_S/m", "mu_r")?;
    for e in entries {
        let note = match e.rel_permeability_range {
            Some([lo, hi]) => format!("range {lo}-{hi}, default {}", e.rel_permeability),
            None => String::new(),
        };
        writeln!(
            t,
            "{:<6} {:<10} {:>18.4e} {:>10}  {note}",
            e.name,
            e.long_name.as_deref().unwrap_or(""),
            e.conductivity_s_per_m,
            e.rel_permeability
        )?;
    }
    print!("{t}");
    Ok(())
}

pub fn couplings(common: &Common) -> Result<()> {
    let s = load(common)?;
    let h = s.pose.distance;
    let tx = s.transmitter_loop;
    let mut csv = String::from(
        "pair,a_m,b_m,h_m,closed_form_H,numeric_H,neumann_H,closed_over_neumann\n",
    );
    let pair = s.coil_pair()?;
    let closed = mutual_inductance_coil_coil_closed(&pair)?;
    let neumann = mutual_inductance_neumann(&pair)?;
    writeln!(
        csv,
        "coil-coil,{},{},{},{},,{},{}",
        format_fixed(tx.half_side()),
        format_fixed(s.receiver_loop.half_side()),
        format_fixed(h),
        format_fixed(closed),
        format_fixed(neumann),
        format_fixed(closed / neumann)
    )?;
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for plate in &s.plates {
        let key = (plate.side_m, plate.distance_m);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let b = plate.half_side();
        let d = plate.distance_m;
        let closed = mutual_inductance_coil_plate(&tx, b, d)?;
        let numeric = mutual_inductance_coil_plate_numeric(&tx, b, d, PLATE_QUADRATURE_PANELS)?;
        let loop_pair = CoaxialPair::new(tx, SquareLoop::new(b, 1)?, d)?;
        let neumann = mutual_inductance_neumann(&loop_pair)?;
        writeln!(
            csv,
            "coil-plate:{:.2}m,{},{},{},{},{},{},{}",
            plate.side_m,
            format_fixed(tx.half_side()),
            format_fixed(b),
            format_fixed(d),
            format_fixed(closed),
            format_fixed(numeric),
            format_fixed(neumann),
            format_fixed(closed / neumann)
        )?;
    }
    let path = out_dir(&s)?.join("couplings.csv");
    write(&path, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

pub fn impedance(common: &Common, k_max: Option<f64>) -> Result<()> {
    let mut s = load(common)?;
    if let Some(k) = k_max {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidInput(format!("--k-max must be > 0, got {k}")).into());
        }
        s.eddy_options.k_max_limit = k;
    }
    let mut csv = String::from(
        "material,side_m,distance_m,rel_permeability,r_m_ohm,l_m_h,k_max_per_m,status\n",
    );
    let mut first_failure: Option<Error> = None;
    for plate in &s.plates {
        let prefix = format!(
            "{},{},{},{}",
            plate.material.name,
            format_fixed(plate.side_m),
            format_fixed(plate.distance_m),
            plate.material.rel_permeability
        );
        match s.plate_impedance(plate) {
            Ok(r) => writeln!(
                csv,
                "{prefix},{},{},{},ok",
                format_fixed(r.impedance.r_m),
                format_fixed(r.impedance.l_m),
                format_fixed(r.k_max_resistance.max(r.k_max_inductance))
            )?,
            Err(e @ Error::Convergence { .. }) => {
                writeln!(csv, "{prefix},,,,{}", e.to_string().replace(',', ";"))?;
                first_failure.get_or_insert(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let path = out_dir(&s)?.join("impedance.csv");
    write(&path, csv.as_bytes())?;
    print!("{csv}");
    match first_failure {
        Some(e) => Err(anyhow::Error::new(e).context("eddy impedance diagnostics")),
        None => Ok(()),
    }
}

fn scenario_curves(s: &Scenario) -> Result<Vec<CharacteristicCurve>> {
    let cases = s.receivers()?;
    Ok(s.curves(&cases)?)
}

pub fn curves(common: &Common) -> Result<()> {
    let s = load(common)?;
    let dir = out_dir(&s)?;
    let cases = s.receivers()?;
    let raw = s.raw_sweeps(&cases)?;
    let curves = s.curves(&cases)?;

    let mut buf = Vec::new();
    write_curves_csv(&curves, &mut buf)?;
    write(&dir.join("curves.csv"), &buf)?;

    let mut buf = Vec::new();
    write_raw_csv(&raw, &mut buf)?;
    write(&dir.join("curves_raw.csv"), &buf)?;

    let noisy = s.noisy_curves(&curves, None);
    let mut buf = Vec::new();
    write_curves_csv(&noisy, &mut buf)?;
    write(&dir.join("curves_noisy.csv"), &buf)?;

    println!(
        "wrote {} curves of {} points to {}",
        curves.len(),
        s.file.sweep.steps,
        dir.display()
    );
    Ok(())
}

fn read_curves(path: &Path) -> Result<Vec<CharacteristicCurve>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_curves_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn fit_model(s: &Scenario, curves: Option<PathBuf>) -> Result<ThresholdModel> {
    let default = s.output_dir().join("curves.csv");
    let training = match curves {
        Some(p) => read_curves(&p)?,
        None if default.exists() => read_curves(&default)?,
        None => scenario_curves(s)?,
    };
    let (metal, coil) = split_by_class(&training)?;
    fit_thresholds(&metal, &coil, s.fit_options()).context("fitting thresholds")
}

pub fn fit(common: &Common, curves: Option<PathBuf>) -> Result<()> {
    let s = load(common)?;
    let model = fit_model(&s, curves)?;
    let dir = out_dir(&s)?;
    let json = model.to_json()?;
    write(&dir.join("thresholds.json"), json.as_bytes())?;
    println!(
        "U-I threshold: u = {:.6e} + {:.6e} i",
        model.u_line.intercept, model.u_line.slope
    );
    let terms: Vec<String> = model
        .p_poly
        .iter()
        .enumerate()
        .map(|(k, c)| format!("{c:.6e} i^{k}"))
        .collect();
    println!("P-I threshold: p = {}", terms.join(" + "));
    println!("gate: {} A", model.i_min_gate);
    Ok(())
}

pub fn detect(common: &Common, model: Option<PathBuf>, samples: Option<PathBuf>) -> Result<()> {
    let s = load(common)?;
    let default_model = s.output_dir().join("thresholds.json");
    let model = match model.or_else(|| default_model.exists().then_some(default_model)) {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let m = ThresholdModel::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
            // Command-line overrides win over the stored gate.
            match common.gate_amps {
                Some(g) => m.with_gate(g)?,
                None => m,
            }
        }
        None => fit_model(&s, None)?,
    };
    let dir = out_dir(&s)?;
    let batch: Vec<LabeledSample> = match samples {
        Some(p) => samples_from_curves(&read_curves(&p)?)?,
        None => {
            let cases = s.receivers()?;
            let generated = s.test_samples(&cases, None)?;
            let as_curves: Vec<CharacteristicCurve> = generated
                .iter()
                .map(|l| {
                    CharacteristicCurve::new(
                        l.label.clone(),
                        vec![wptmod::characteristics::CurvePoint {
                            i_tx: l.sample.i_tx,
                            u_tx: l.sample.u_tx,
                            p_in: l.sample.p_in,
                        }],
                    )
                })
                .collect::<wptmod::Result<_>>()?;
            let mut buf = Vec::new();
            write_curves_csv(&as_curves, &mut buf)?;
            write(&dir.join("samples.csv"), &buf)?;
            generated
        }
    };
    if batch.is_empty() {
        bail!(Error::InvalidInput("no samples to classify".into()));
    }
    let report = evaluate_batch(&batch, &model)?;
    write(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    let table = report.to_table();
    write(&dir.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
