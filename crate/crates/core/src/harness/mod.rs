//! Experiment configuration, seeded repeats, aggregation and reports.

mod aggregate;
mod config;
mod report;
mod run;

pub use aggregate::{
    aggregate, aggregate_metrics, improvement_pct, mean_ci, AggregateReport, Metric, MetricSummary, ModelSummary, Z95,
};
pub use config::{DatasetSpec, ExperimentConfig, LoadedData, MAX_REPEATS};
pub use report::{
    emit_report, from_csv, read_runs, to_csv, to_markdown, write_runs, Format, RESULTS_HEADER, RUNS_FILE,
    RUNS_TIMING_FILE, SKIPPED_FILE,
};
pub use run::{run_experiment, run_on_data, ExperimentOutcome, RunResult, SkipRecord};

use std::path::Path;

use crate::error::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const MARKDOWN_FILE: &str = "report.md";

const QUALITY: [Metric; 5] = [Metric::Rmse, Metric::Auc, Metric::Ndcg, Metric::Gini, Metric::Entropy];

/// Writes the aggregate outputs of an experiment into `dir`:
/// `results.csv` (quality metrics only, byte-stable across identical runs),
/// `timing.csv` (training time) and `report.md` (everything).
pub fn write_reports(outcome: &ExperimentOutcome, dir: &Path, formats: &[Format]) -> Result<AggregateReport> {
    let full = aggregate(&outcome.dataset, outcome.k, &outcome.results)?;
    for w in &full.warnings {
        log::warn!("{w}");
    }
    for f in formats {
        match f {
            Format::Csv => {
                let base = crate::models::ModelKind::MfBiased;
                let quality = aggregate_metrics(&outcome.dataset, outcome.k, &outcome.results, base, &QUALITY)?;
                let timing = aggregate_metrics(
                    &outcome.dataset,
                    outcome.k,
                    &outcome.results,
                    base,
                    &[Metric::TrainingTime],
                )?;
                emit_report(&quality, Format::Csv, &dir.join(RESULTS_FILE), &outcome.skipped)?;
                emit_report(&timing, Format::Csv, &dir.join(TIMING_FILE), &outcome.skipped)?;
            }
            Format::Markdown => emit_report(&full, Format::Markdown, &dir.join(MARKDOWN_FILE), &outcome.skipped)?,
        }
    }
    Ok(full)
}
