//! On-disk run outputs: per-iteration CSV logs and JSON summaries.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{CheckpointSelection, ExperimentConfig, IterationLog, Mode, RunOutcome, Seeds};
use crate::metrics::MetricReport;

pub const ITERATION_HEADER: [&str; 11] = [
    "iteration",
    "budget",
    "f1",
    "js",
    "f1_a",
    "js_a",
    "f1_w",
    "js_w",
    "align_low",
    "align_ok",
    "align_high",
];

/// One row of the iteration CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub budget: usize,
    pub f1: f64,
    pub js: f64,
    pub f1_a: f64,
    pub js_a: f64,
    pub f1_w: f64,
    pub js_w: f64,
    pub align_low: f64,
    pub align_ok: f64,
    pub align_high: f64,
}

impl From<&IterationLog> for IterationRow {
    fn from(log: &IterationLog) -> Self {
        let v = &log.validation;
        IterationRow {
            iteration: log.iteration,
            budget: log.budget,
            f1: v.f1,
            js: v.js,
            f1_a: v.f1_a,
            js_a: v.js_a,
            f1_w: v.f1_w,
            js_w: v.js_w,
            align_low: log.alignment.proportion_low,
            align_ok: log.alignment.proportion_aligned,
            align_high: log.alignment.proportion_high,
        }
    }
}

pub fn write_iteration_csv<W: Write>(logs: &[IterationLog], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for log in logs {
        writer.serialize(IterationRow::from(log))?;
    }
    writer.flush().map_err(|e| Error::io("<iteration csv>", e))?;
    Ok(())
}

pub fn read_iteration_csv(path: &Path) -> Result<Vec<IterationRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != ITERATION_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Final result of one seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub mode: Mode,
    pub seeds: Seeds,
    pub batch_size: usize,
    pub total_train_annotations: usize,
    pub final_budget: usize,
    pub selection: CheckpointSelection,
    pub delta_pct: f64,
    pub test: MetricReport,
}

impl RunSummary {
    pub fn new(config: &ExperimentConfig, outcome: &RunOutcome, test: MetricReport) -> Self {
        RunSummary {
            label: config.strategy_label(),
            mode: config.mode,
            seeds: config.seeds,
            batch_size: outcome.batch_size,
            total_train_annotations: outcome.total_train_annotations,
            final_budget: outcome.ledger.cumulative,
            selection: outcome.selection,
            delta_pct: outcome.delta_pct(),
            test,
        }
    }
}

/// Metric means over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedSummary {
    pub label: String,
    pub mode: Mode,
    pub runs: usize,
    pub f1: f64,
    pub js: f64,
    pub f1_a: f64,
    pub js_a: f64,
    pub f1_w: f64,
    pub js_w: f64,
    pub delta_pct: f64,
    pub budget_at_best: f64,
}

pub fn average(summaries: &[RunSummary]) -> Result<AveragedSummary> {
    let first = summaries.first().ok_or(Error::EmptyLog)?;
    let n = summaries.len() as f64;
    let mean = |f: fn(&RunSummary) -> f64| summaries.iter().map(f).sum::<f64>() / n;
    Ok(AveragedSummary {
        label: first.label.clone(),
        mode: first.mode,
        runs: summaries.len(),
        f1: mean(|s| s.test.f1),
        js: mean(|s| s.test.js),
        f1_a: mean(|s| s.test.f1_a),
        js_a: mean(|s| s.test.js_a),
        f1_w: mean(|s| s.test.f1_w),
        js_w: mean(|s| s.test.js_w),
        delta_pct: mean(|s| s.delta_pct),
        budget_at_best: mean(|s| s.selection.budget_at_best as f64),
    })
}

/// Comparison table in the column order `f1,js,f1_a,js_a,f1_w,js_w,delta_pct`.
pub fn comparison_csv(rows: &[AveragedSummary]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["strategy", "f1", "js", "f1_a", "js_a", "f1_w", "js_w", "delta_pct"])?;
    for r in rows {
        writer.write_record([
            r.label.clone(),
            r.f1.to_string(),
            r.js.to_string(),
            r.f1_a.to_string(),
            r.js_a.to_string(),
            r.f1_w.to_string(),
            r.js_w.to_string(),
            r.delta_pct.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::io("<report>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The same table with aligned columns, for terminals.
pub fn comparison_text(rows: &[AveragedSummary]) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max("strategy".len());
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}\n",
        "strategy", "F1", "JS", "F1a", "JSa", "F1w", "JSw", "delta%"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>7.1}\n",
            r.label, r.f1, r.js, r.f1_a, r.js_a, r.f1_w, r.js_w, r.delta_pct
        ));
    }
    out
}
