//! CSV exports for external plotting tools.

use std::path::Path;

use ancilla_homodyne::decision::coherent_quadrature_density;
use ancilla_homodyne::receiver::estimate_ber;

use crate::commands::{load, ScanFile};
use crate::config;
use crate::output::{csv_text, emit};
use crate::{CliError, PlotKind};

fn mismatch(kind: &str, source: &Path, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `--source`: {} is not a valid {kind} source: {why}", source.display()))
}

pub fn run(
    kind: PlotKind,
    source: &Path,
    config: Option<&Path>,
    bins: usize,
    alphas: Option<Vec<f64>>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (name, text) = match kind {
        PlotKind::X0Histogram => ("x0-histogram.csv", x0_histogram(source, config, bins)?),
        PlotKind::BerVsAlpha => ("ber-vs-alpha.csv", ber_vs_alpha(source, alphas, seed)?),
        PlotKind::ScanHeatmap => ("scan-heatmap.csv", scan_heatmap(source)?),
    };
    emit(out, name, &text)
}

/// Histogram of `x₀` from an mc trajectory dump, with the mixture of
/// `Gaussian(√2s, ½)` weighted by the dump's own symbol counts.
fn x0_histogram(source: &Path, config: Option<&Path>, bins: usize) -> Result<String, CliError> {
    let kind = "x0-histogram";
    let config =
        config.ok_or_else(|| CliError::Config("invalid `--config`: x0-histogram needs the run config for α".into()))?;
    if bins == 0 {
        return Err(CliError::Config("invalid `--bins`: must be >= 1".into()));
    }
    let alpha = config::read(config)?.load()?.signal.alpha();
    let mut reader = csv::Reader::from_path(source).map_err(|e| mismatch(kind, source, e))?;
    let header = reader.headers().map_err(|e| mismatch(kind, source, e))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| mismatch(kind, source, format!("no `{name}` column")))
    };
    let (ti, xi) = (col("truth")?, col("x0")?);
    let mut xs = Vec::new();
    let mut plus = 0usize;
    for rec in reader.records() {
        let rec = rec.map_err(|e| mismatch(kind, source, e))?;
        let x0 = rec.get(xi).unwrap_or("");
        if x0.is_empty() {
            return Err(mismatch(kind, source, "rows carry no x0 (dump of an rb run)"));
        }
        xs.push(x0.parse::<f64>().map_err(|e| mismatch(kind, source, e))?);
        match rec.get(ti) {
            Some("plus") => plus += 1,
            Some("minus") => {}
            other => return Err(mismatch(kind, source, format!("unknown truth {other:?}"))),
        }
    }
    if xs.is_empty() {
        return Err(mismatch(kind, source, "no rows"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for x in &xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = xs.len() as f64;
    let w_plus = plus as f64 / n;
    // Gaussian(√2s, ½) is the x-quadrature density of the coherent state |s⟩.
    let reference = |x: f64| {
        w_plus * coherent_quadrature_density(alpha, x) + (1.0 - w_plus) * coherent_quadrature_density(-alpha, x)
    };
    let header = ["bin_center", "count", "density", "reference_density"].map(String::from);
    let rows: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let centre = lo + (i as f64 + 0.5) * width;
            vec![
                centre.to_string(),
                c.to_string(),
                (*c as f64 / (n * width)).to_string(),
                reference(centre).to_string(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

fn ber_vs_alpha(source: &Path, alphas: Option<Vec<f64>>, seed: Option<u64>) -> Result<String, CliError> {
    let (base, _) = load(source, seed).map_err(|e| match e {
        CliError::Config(m) => mismatch("ber-vs-alpha", source, m),
        other => other,
    })?;
    let list = alphas
        .or_else(|| base.file.alphas.clone())
        .ok_or_else(|| CliError::Config("invalid `alphas`: ber-vs-alpha needs an `alphas` list or --alphas".into()))?;
    let header = ["alpha", "ber", "std_error", "ber0"].map(String::from);
    let mut rows = Vec::with_capacity(list.len());
    for (i, a) in list.iter().enumerate() {
        let mut file = base.file.clone();
        file.alpha = *a;
        let loaded = file.load().map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("alphas[{i}]: {m}")),
            other => other,
        })?;
        let r = estimate_ber(&loaded.receiver()?, loaded.file.trials, loaded.file.seed).map_err(CliError::from_core)?;
        rows.push(vec![a.to_string(), r.estimate.to_string(), r.std_error.to_string(), r.ber0.to_string()]);
    }
    csv_text(&header, &rows)
}

/// Per `(ancilla, θ, χ)` the smallest BER over the remaining scan axes.
fn scan_heatmap(source: &Path) -> Result<String, CliError> {
    let kind = "scan-heatmap";
    let text = std::fs::read_to_string(source).map_err(|e| mismatch(kind, source, e))?;
    let mut file: ScanFile = toml::from_str(&text).map_err(|e| mismatch(kind, source, e))?;
    if file.command != "scan-u2" {
        return Err(mismatch(kind, source, format!("report of `{}`", file.command)));
    }
    file.rows.sort_by_key(|r| r.index);
    let mut cells: Vec<(String, f64, f64, f64, f64)> = Vec::new();
    for r in &file.rows {
        let key = |c: &(String, f64, f64, f64, f64)| c.0 == r.ancilla && c.1 == r.theta && c.2 == r.chi;
        match cells.iter_mut().find(|c| key(c)) {
            Some(c) => {
                c.3 = c.3.min(r.ber_threshold);
                c.4 = c.4.min(r.ber_ml);
            }
            None => cells.push((r.ancilla.clone(), r.theta, r.chi, r.ber_threshold, r.ber_ml)),
        }
    }
    let header = ["ancilla", "theta", "chi", "ber_threshold", "ber_ml", "ber0"].map(String::from);
    let rows: Vec<Vec<String>> = cells
        .into_iter()
        .map(|(a, t, c, bt, bm)| {
            vec![a, t.to_string(), c.to_string(), bt.to_string(), bm.to_string(), file.ber0.to_string()]
        })
        .collect();
    csv_text(&header, &rows)
}
