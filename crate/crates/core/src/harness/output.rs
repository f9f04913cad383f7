//! CSV, JSON and SVG emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CsbError, Result};
use crate::harness::experiment::AggregateTrace;

pub const CSV_FILE: &str = "regret.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SVG_FILE: &str = "regret.svg";

#[derive(Debug, Serialize)]
struct SeriesSummary<'a> {
    label: &'a str,
    policy: &'a str,
    replications: usize,
    horizon: usize,
    final_regret: f64,
    final_ci_low: f64,
    final_ci_high: f64,
    phase1_mean_rounds: f64,
    phase1_max_rounds: usize,
    estimation_completed_rate: f64,
    threshold_recovery_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_bound_envelope: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    series: Vec<SeriesSummary<'a>>,
}

pub fn render_csv(traces: &[AggregateTrace]) -> String {
    let mut out = String::from("round,mean_regret,ci_low,ci_high,policy,label\n");
    for tr in traces {
        for t in 0..tr.horizon() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t + 1,
                tr.mean[t],
                tr.ci_low[t],
                tr.ci_high[t],
                tr.policy,
                csv_field(&tr.label)
            )
            .unwrap();
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_summary(traces: &[AggregateTrace]) -> String {
    let series = traces
        .iter()
        .map(|tr| SeriesSummary {
            label: &tr.label,
            policy: tr.policy.as_str(),
            replications: tr.replications,
            horizon: tr.horizon(),
            final_regret: tr.final_regret(),
            final_ci_low: tr.ci_low.last().copied().unwrap_or(0.0),
            final_ci_high: tr.ci_high.last().copied().unwrap_or(0.0),
            phase1_mean_rounds: tr.phase1_mean,
            phase1_max_rounds: tr.phase1_max,
            estimation_completed_rate: tr.estimation_completed,
            threshold_recovery_rate: tr.recovery_rate,
            lower_bound_envelope: tr.lower_bound,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&Summary { series }).expect("serializable");
    s.push('\n');
    s
}

/// Writes `regret.csv`, `summary.json` and `regret.svg` into `out_dir`.
pub fn emit_outputs(traces: &[AggregateTrace], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if traces.is_empty() {
        return Err(CsbError::EmptyTraces);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CsbError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let files = [
        (CSV_FILE, render_csv(traces)),
        (SUMMARY_FILE, render_summary(traces)),
        (SVG_FILE, crate::harness::svg::render(traces)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
