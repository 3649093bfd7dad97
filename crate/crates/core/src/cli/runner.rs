use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BathConfig, ExperimentConfig};
use crate::analysis::{
    decompose_coherence, tabulate_sweep, CellOutcome, CellSummary, CoherenceDecomposition,
    SweepCell, SweepResult,
};
use crate::bath::{
    fit_multi_exponential, load_terms, lorentzian_terms, terms_to_json, ExpTermList, FitReport,
    LorentzianBath, OhmicBath,
};
use crate::dynamics::{propagate, ControlPulse, Trajectory};
use crate::error::{Error, Result};
use crate::optimizer::{gate_error, initial_guess, optimize_from, OptimizationRecord};

/// Kernel terms for the configured bath, fitted or loaded for the Ohmic family.
pub fn resolve_terms(config: &ExperimentConfig) -> Result<(ExpTermList, Option<FitReport>)> {
    match &config.bath {
        BathConfig::Lorentzian {
            alpha,
            gamma,
            omega_big,
        } => Ok((lorentzian_terms(&LorentzianBath::new(*alpha, *gamma, *omega_big)?), None)),
        BathConfig::Ohmic {
            terms_file: Some(path),
            ..
        } => {
            let (terms, report) = load_terms(path)?;
            Ok((terms, Some(report)))
        }
        BathConfig::Ohmic {
            alpha_o,
            omega_c,
            fit_terms,
            fit_horizon,
            ..
        } => {
            let (terms, report) = fit_ohmic(config, *alpha_o, *omega_c, *fit_terms, *fit_horizon)?;
            Ok((terms, Some(report)))
        }
    }
}

fn fit_ohmic(
    config: &ExperimentConfig,
    alpha_o: f64,
    omega_c: f64,
    k: usize,
    horizon: Option<f64>,
) -> Result<(ExpTermList, FitReport)> {
    let bath = OhmicBath::new(alpha_o, omega_c)?;
    let horizon = horizon.unwrap_or_else(|| bath.default_fit_horizon(config.t_f));
    let samples = bath.kernel_samples(horizon, config.fit.samples);
    fit_multi_exponential(&samples, k, &config.fit_options(&bath))
}

/// Fits the Ohmic kernel of `config`; Lorentzian baths are analytic and rejected.
pub fn fit_bath(config: &ExperimentConfig) -> Result<(ExpTermList, FitReport)> {
    match &config.bath {
        BathConfig::Ohmic {
            alpha_o,
            omega_c,
            fit_terms,
            fit_horizon,
            ..
        } => fit_ohmic(config, *alpha_o, *omega_c, *fit_terms, *fit_horizon),
        BathConfig::Lorentzian { .. } => Err(Error::config(
            "bath.kind",
            "the Lorentzian kernel is a single exact exponential; nothing to fit",
        )),
    }
}

/// The configured pulse file, or the closed-system guess.
pub fn starting_pulse(config: &ExperimentConfig) -> Result<ControlPulse> {
    let bounds = config.bounds()?;
    match &config.pulse_file {
        Some(path) => read_pulse_csv(path, config.dt, bounds),
        None => initial_guess(config.target, config.t_f, config.dt, config.omega0, bounds, config.guess),
    }
}

fn read_pulse_csv(path: &Path, dt: f64, bounds: crate::dynamics::Bounds) -> Result<ControlPulse> {
    let mut reader = csv::Reader::from_path(path)?;
    let column = reader
        .headers()?
        .iter()
        .position(|h| h == "epsilon")
        .ok_or_else(|| Error::config("pulse_file", "missing `epsilon` column"))?;
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row?;
        let value: f64 = row[column]
            .trim()
            .parse()
            .map_err(|_| Error::config("pulse_file", format!("bad epsilon value `{}`", &row[column])))?;
        samples.push(value);
    }
    ControlPulse::new(dt, samples, bounds)
}

pub struct RunArtifacts {
    pub bath: BathConfig,
    pub record: OptimizationRecord,
    pub before: CoherenceDecomposition,
    pub after: CoherenceDecomposition,
    pub terms: ExpTermList,
    pub fit_report: Option<FitReport>,
    pub final_trajectory: Trajectory,
}

/// Fit (if needed), optimize, analyze.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let (terms, fit_report) = resolve_terms(config)?;
    let guess = starting_pulse(config)?;
    let initial_traj = propagate(&guess, &terms, config.omega0)?;
    let before = decompose_coherence(&initial_traj, &guess, config.target);
    drop(initial_traj);
    let record = optimize_from(guess, &terms, config.omega0, config.target, &config.krotov)?;
    let final_trajectory = propagate(&record.final_pulse, &terms, config.omega0)?;
    let after = decompose_coherence(&final_trajectory, &record.final_pulse, config.target);
    Ok(RunArtifacts {
        bath: config.bath.clone(),
        record,
        before,
        after,
        terms,
        fit_report,
        final_trajectory,
    })
}

#[derive(Serialize)]
struct RecordFile<'a> {
    bath: &'a BathConfig,
    #[serde(flatten)]
    record: &'a OptimizationRecord,
}

#[derive(Serialize)]
struct Decomposition<'a> {
    before: &'a CoherenceDecomposition,
    after: &'a CoherenceDecomposition,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_pulse_csv(path: &Path, pulse: &ControlPulse, omega0: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "epsilon", "omega_t"])?;
    for (k, e) in pulse.samples.iter().enumerate() {
        w.write_record([fmt_num(pulse.time(k)), fmt_num(*e), fmt_num(omega0 + e)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_errors_csv(path: &Path, errors: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "error"])?;
    for (i, e) in errors.iter().enumerate() {
        w.write_record([i.to_string(), fmt_num(*e)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t, Re F, Im F` followed by the 16 propagator entries as real/imaginary pairs.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string(), "re_f".into(), "im_f".into()];
    for r in 0..4 {
        for c in 0..4 {
            header.push(format!("re_g{r}{c}"));
            header.push(format!("im_g{r}{c}"));
        }
    }
    w.write_record(&header)?;
    for k in 0..trajectory.len() {
        let f = trajectory.f_total(k);
        let g = trajectory.propagator(k);
        let mut row = vec![fmt_num(trajectory.time(k)), fmt_num(f.re), fmt_num(f.im)];
        for r in 0..4 {
            for c in 0..4 {
                row.push(fmt_num(g[(r, c)].re));
                row.push(fmt_num(g[(r, c)].im));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `record.json`, `pulse.csv`, `errors.csv`, `decomposition.json`, plus
/// `terms.json` for fitted kernels and `trajectory.csv` on request.
pub fn write_run(artifacts: &RunArtifacts, dir: &Path, emit_trajectory: bool) -> Result<()> {
    create_dir(dir)?;
    let record = &artifacts.record;
    write_json(
        &dir.join("record.json"),
        &RecordFile {
            bath: &artifacts.bath,
            record,
        },
    )?;
    write_pulse_csv(&dir.join("pulse.csv"), &record.final_pulse, record.omega0)?;
    write_errors_csv(&dir.join("errors.csv"), &record.errors_per_iteration)?;
    write_json(
        &dir.join("decomposition.json"),
        &Decomposition {
            before: &artifacts.before,
            after: &artifacts.after,
        },
    )?;
    if let Some(report) = &artifacts.fit_report {
        write_text(&dir.join("terms.json"), &terms_to_json(&artifacts.terms, report)?)?;
    }
    if emit_trajectory {
        write_trajectory_csv(&dir.join("trajectory.csv"), &artifacts.final_trajectory)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

/// Machine-readable failure description.
pub fn error_json(err: &Error) -> String {
    let field = match err {
        Error::Config { field, .. } => Some(field.as_str()),
        _ => None,
    };
    serde_json::to_string_pretty(&ErrorReport {
        kind: err.kind(),
        message: err.to_string(),
        field,
    })
    .expect("plain struct serializes")
}

pub fn write_error(dir: &Path, err: &Error) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join("error.json"), &format!("{}\n", error_json(err)))
}

fn run_cell(index: usize, config: &ExperimentConfig, dir: &Path, emit_trajectory: bool) -> SweepCell {
    let params = config.cell_params();
    let cell_dir = dir.join("cells").join(format!("{index:04}"));
    let outcome = match run_experiment(config).and_then(|a| {
        write_run(&a, &cell_dir, emit_trajectory)?;
        Ok(a)
    }) {
        Ok(a) => CellOutcome::Ok(CellSummary::from_record(&a.record, Some(a.before), Some(a.after))),
        Err(e) => {
            // Best effort: the marker in the table is what matters.
            let _ = write_error(&cell_dir, &e);
            CellOutcome::Failed {
                kind: e.kind().to_string(),
                message: e.to_string(),
            }
        }
    };
    if config.output.verbose {
        eprintln!("cell {index}: {params:?} done");
    }
    SweepCell { index, params, outcome }
}

/// Runs every grid cell on a pool of `threads` workers (all cores when `None`).
///
/// Per-cell artifacts go to `dir/cells/NNNN/`.
pub fn run_sweep(config: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> Result<SweepResult> {
    let cells = config.expand_grid();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let emit = config.output.emit_trajectory;
    let results: Vec<SweepCell> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_cell(i, c, dir, emit))
            .collect()
    });
    Ok(tabulate_sweep(results))
}

/// `sweep.json`, `cells.csv`, `tables.csv` (all blocks, long form), one
/// `table_NN.csv` matrix of `Es` per block and, for t_f scans, `series.csv`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("sweep.json"), result)?;

    let path = dir.join("cells.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "index", "family", "coupling", "width", "center", "t_f", "status", "E0", "Es", "improvement",
        "iterations", "error_kind",
    ])?;
    for cell in &result.cells {
        let p = &cell.params;
        let mut row = vec![
            cell.index.to_string(),
            family_name(p.family).into(),
            fmt_num(p.coupling),
            fmt_num(p.width),
            fmt_opt(p.center),
            fmt_num(p.t_f),
        ];
        match &cell.outcome {
            CellOutcome::Ok(s) => row.extend([
                "ok".into(),
                fmt_num(s.initial_error),
                fmt_num(s.final_error),
                fmt_opt(s.improvement),
                s.iterations_run.to_string(),
                String::new(),
            ]),
            CellOutcome::Failed { kind, .. } => row.extend([
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                kind.clone(),
            ]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("tables.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["block", "family", "center", "t_f", "coupling", "width", "Es", "improvement"])?;
    for (b, block) in result.blocks.iter().enumerate() {
        for (r, coupling) in block.couplings.iter().enumerate() {
            for (c, width) in block.widths.iter().enumerate() {
                w.write_record([
                    b.to_string(),
                    family_name(block.family).into(),
                    fmt_opt(block.center),
                    fmt_num(block.t_f),
                    fmt_num(*coupling),
                    fmt_num(*width),
                    block.final_error[r][c].map(fmt_num).unwrap_or_else(|| "error".into()),
                    block.improvement[r][c].map(fmt_num).unwrap_or_else(|| "error".into()),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for (b, block) in result.blocks.iter().enumerate() {
        let path = dir.join(format!("table_{b:02}.csv"));
        let mut w = csv_writer(&path)?;
        let mut header = vec![format!("coupling\\width (center={}, t_f={})", fmt_opt(block.center), fmt_num(block.t_f))];
        header.extend(block.widths.iter().map(|v| fmt_num(*v)));
        w.write_record(&header)?;
        for (coupling, row) in block.couplings.iter().zip(&block.final_error) {
            let mut line = vec![fmt_num(*coupling)];
            line.extend(row.iter().map(|e| e.map(fmt_num).unwrap_or_else(|| "error".into())));
            w.write_record(&line)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    if !result.series.is_empty() {
        let path = dir.join("series.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["series", "family", "coupling", "width", "center", "t_f", "Es", "improvement"])?;
        for (s, series) in result.series.iter().enumerate() {
            for (i, t) in series.t_f.iter().enumerate() {
                w.write_record([
                    s.to_string(),
                    family_name(series.family).into(),
                    fmt_num(series.coupling),
                    fmt_num(series.width),
                    fmt_opt(series.center),
                    fmt_num(*t),
                    series.final_error[i].map(fmt_num).unwrap_or_else(|| "error".into()),
                    series.improvement[i].map(fmt_num).unwrap_or_else(|| "error".into()),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn family_name(f: crate::analysis::BathFamily) -> &'static str {
    match f {
        crate::analysis::BathFamily::Lorentzian => "lorentzian",
        crate::analysis::BathFamily::Ohmic => "ohmic",
    }
}

#[derive(Serialize)]
struct PropagationSummary {
    gate_error: f64,
    steps: usize,
    decomposition: CoherenceDecomposition,
}

/// Dynamics only: propagates the starting pulse and writes `trajectory.csv`,
/// `pulse.csv` and `propagation.json`.
pub fn run_propagation(config: &ExperimentConfig, dir: &Path) -> Result<Trajectory> {
    let (terms, fit_report) = resolve_terms(config)?;
    let pulse = starting_pulse(config)?;
    let trajectory = propagate(&pulse, &terms, config.omega0)?;
    create_dir(dir)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &trajectory)?;
    write_pulse_csv(&dir.join("pulse.csv"), &pulse, config.omega0)?;
    write_json(
        &dir.join("propagation.json"),
        &PropagationSummary {
            gate_error: gate_error(trajectory.final_propagator(), &config.target.target()),
            steps: pulse.len(),
            decomposition: decompose_coherence(&trajectory, &pulse, config.target),
        },
    )?;
    if let Some(report) = &fit_report {
        write_text(&dir.join("terms.json"), &terms_to_json(&terms, report)?)?;
    }
    Ok(trajectory)
}

/// Fits and writes `terms.json` (terms plus report).
pub fn run_fit(config: &ExperimentConfig, dir: &Path) -> Result<FitReport> {
    let (terms, report) = fit_bath(config)?;
    create_dir(dir)?;
    write_text(&dir.join("terms.json"), &terms_to_json(&terms, &report)?)?;
    Ok(report)
}
