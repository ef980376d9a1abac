use std::path::Path;

use ancilla_homodyne::analysis::exact_ber_n1;
use ancilla_homodyne::hermite::HermiteTable;
use ancilla_homodyne::policy::FeedforwardPolicy;
use ancilla_homodyne::receiver::{simulate as run_simulation, BerReport, TrajectoryRecord};
use ancilla_homodyne::u2::{scan_ber, scan_grid, ScanOptions, ScanReport, FLAG_MARGIN};
use ancilla_homodyne::Truth;
use serde::{Deserialize, Serialize};

use crate::config::{self, FileConfig, Loaded};
use crate::output::{csv_text, emit, io_error, toml_text};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub estimator: &'static str,
    pub stratified: bool,
    pub policy: &'static str,
    pub steps: usize,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ber0_reference: f64,
    pub max_leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrong_decisions: Option<u64>,
    pub seed: u64,
    pub config_digest: String,
}

impl SimulateReport {
    pub fn new(r: &BerReport, policy: &dyn FeedforwardPolicy, config_digest: String) -> Self {
        SimulateReport {
            command: "simulate",
            estimator: r.estimator.label(),
            stratified: r.stratified,
            policy: policy.name(),
            steps: policy.steps(),
            trials: r.trials,
            estimate: r.estimate,
            std_error: r.std_error,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            ber0_reference: r.ber0,
            max_leakage: r.max_leakage,
            wrong_decisions: r.wrong_decisions,
            seed: r.seed,
            config_digest,
        }
    }
}

pub fn truth_label(t: Truth) -> &'static str {
    match t {
        Truth::Plus => "plus",
        Truth::Minus => "minus",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn dump_csv(records: &[TrajectoryRecord], steps: usize) -> Result<String, CliError> {
    let mut header = vec!["trial".to_string(), "truth".to_string()];
    header.extend((1..=steps).map(|i| format!("y_{i}")));
    header.extend(["x".to_string(), "cond_error".to_string()]);
    header.extend((1..=steps).map(|i| format!("theta_{i}")));
    header.extend(["x0".to_string(), "decision".to_string()]);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.trial.to_string(), truth_label(r.truth).to_string()];
            row.extend(r.outcomes.iter().map(|y| y.to_string()));
            row.push(opt(r.x));
            row.push(opt(r.conditional_error));
            row.extend(r.thetas.iter().map(|t| t.to_string()));
            row.push(opt(r.x0));
            row.push(r.decision.map(truth_label).unwrap_or_default().to_string());
            row
        })
        .collect();
    csv_text(&header, &rows)
}

/// Reads and validates a config, applying the `--seed` override before the
/// digest is taken.
pub fn load(path: &Path, seed: Option<u64>) -> Result<(Loaded, String), CliError> {
    let mut file: FileConfig = config::read(path)?;
    if let Some(s) = seed {
        file.seed = s;
    }
    let digest = file.digest();
    Ok((file.load()?, digest))
}

pub fn simulate(path: &Path, seed: Option<u64>, dump: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let (loaded, digest) = load(path, seed)?;
    let receiver = loaded.receiver()?;
    let (report, records) =
        run_simulation(&receiver, loaded.file.trials, loaded.file.seed, dump.is_some()).map_err(CliError::from_core)?;
    if let Some(p) = dump {
        let text = dump_csv(&records, receiver.steps())?;
        std::fs::write(p, text).map_err(|e| io_error(p, e))?;
    }
    let text = toml_text(&SimulateReport::new(&report, receiver.policy.as_ref(), digest));
    emit(out, "simulate.toml", &text)
}

#[derive(Debug, Serialize)]
struct ExactN1Report {
    command: &'static str,
    alpha: f64,
    priors: [f64; 2],
    ancilla: String,
    theta: f64,
    ber: f64,
    ber0: f64,
    difference: f64,
    config_digest: String,
}

pub fn exact_n1(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (loaded, digest) = load(path, None)?;
    let policy = loaded.receiver()?.policy;
    if policy.name() != "constant" {
        return Err(CliError::Config(format!(
            "invalid `policy.kind`: exact-n1 needs the constant policy, got {}",
            policy.name()
        )));
    }
    if policy.steps() != 1 {
        return Err(CliError::Config(format!(
            "invalid `thetas`: exact-n1 needs exactly one step (N = 1), got N = {}",
            policy.steps()
        )));
    }
    let choice = policy.choose(0, &[]);
    let ancilla = choice.ancilla.prepare(loaded.truncation).map_err(CliError::from_core)?;
    let table = HermiteTable::new(loaded.grid, loaded.truncation.cutoff);
    let r =
        exact_ber_n1(&loaded.signal, &ancilla, choice.theta, loaded.truncation, &table).map_err(CliError::from_core)?;
    let report = ExactN1Report {
        command: "exact-n1",
        alpha: loaded.file.alpha,
        priors: loaded.file.priors,
        ancilla: choice.ancilla.to_string(),
        theta: choice.theta,
        ber: r.ber,
        ber0: r.ber0,
        difference: r.difference(),
        config_digest: digest,
    };
    emit(out, "exact-n1.toml", &toml_text(&report))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanFile {
    pub command: String,
    pub ber0: f64,
    pub dropped: Vec<String>,
    pub threshold_rule: String,
    pub ml_rule: String,
    pub flag_margin: f64,
    pub ml_stride: usize,
    pub y_grid_points: usize,
    pub points: usize,
    pub flagged: usize,
    pub config_digest: String,
    pub rows: Vec<ScanFileRow>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanFileRow {
    pub index: usize,
    pub ancilla: String,
    pub theta: f64,
    pub phi: f64,
    pub chi: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub ber_threshold: f64,
    pub ber_ml: f64,
    pub diff_threshold: f64,
    pub diff_ml: f64,
    pub flagged: bool,
}

fn scan_file(report: &ScanReport, ml_stride: usize, y_points: usize, digest: String) -> ScanFile {
    let rows: Vec<ScanFileRow> = report
        .rows
        .iter()
        .map(|r| ScanFileRow {
            index: r.index,
            ancilla: r.ancilla.to_string(),
            theta: r.params.theta,
            phi: r.params.phi,
            chi: r.params.chi,
            phi0: r.params.phi0,
            phi1: r.params.phi1,
            ber_threshold: r.ber_threshold,
            ber_ml: r.ber_ml,
            diff_threshold: r.ber_threshold - report.ber0,
            diff_ml: r.ber_ml - report.ber0,
            flagged: r.flagged,
        })
        .collect();
    ScanFile {
        command: "scan-u2".into(),
        ber0: report.ber0,
        dropped: report.dropped.iter().map(|s| s.to_string()).collect(),
        threshold_rule: report.rules[0].into(),
        ml_rule: report.rules[1].into(),
        flag_margin: FLAG_MARGIN,
        ml_stride,
        y_grid_points: y_points,
        points: rows.len(),
        flagged: rows.iter().filter(|r| r.flagged).count(),
        config_digest: digest,
        rows,
    }
}

pub fn scan_u2(path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (loaded, digest) = load(path, None)?;
    let grid = loaded.scan_grid()?;
    let options = ScanOptions { truncation: loaded.truncation, ml_stride: loaded.ml_stride() };
    let y_grid = scan_grid();
    let table = HermiteTable::new(y_grid, loaded.truncation.cutoff);
    let report = scan_ber(&grid, options, &table).map_err(CliError::from_core)?;
    let file = scan_file(&report, options.ml_stride, y_grid.points(), digest);
    emit(out, "scan-u2.toml", &toml_text(&file))
}
