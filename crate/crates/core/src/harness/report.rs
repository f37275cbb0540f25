//! Report files: aggregate CSV and markdown tables, and the per-run CSVs
//! that `report` re-aggregates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::MetricValues;
use crate::models::ModelKind;

use super::aggregate::{AggregateReport, Metric, MetricSummary, ModelSummary};
use super::run::{ExperimentOutcome, RunResult, SkipRecord};

pub const RESULTS_HEADER: [&str; 6] = ["dataset", "model", "metric", "mean", "ci95", "improvement_pct"];

pub const RUNS_FILE: &str = "runs.csv";
pub const RUNS_TIMING_FILE: &str = "runs_timing.csv";
pub const SKIPPED_FILE: &str = "skipped.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn csv_string(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    rows(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per (model, metric); improvement blank for the baseline.
pub fn to_csv(report: &AggregateReport) -> Result<String> {
    csv_string(|w| {
        w.write_record(RESULTS_HEADER)?;
        for m in &report.models {
            for s in &m.metrics {
                let imp = s.improvement_pct.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    report.dataset.as_str(),
                    m.model.tag(),
                    &s.metric.csv_tag(report.k),
                    &s.mean.to_string(),
                    &s.ci95.to_string(),
                    &imp,
                ])?;
            }
        }
        Ok(())
    })
}

/// Parses [`to_csv`] output. Run counts are not stored and come back as 0,
/// and warnings are dropped.
pub fn from_csv(text: &str) -> Result<AggregateReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::InvalidArgument("results CSV header mismatch".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad number `{s}` in results CSV")))
    };
    let mut dataset: Option<String> = None;
    let mut k = crate::metrics::DEFAULT_K;
    let mut baseline = None;
    let mut models: Vec<ModelSummary> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let ds = &rec[0];
        match &dataset {
            Some(d) if d != ds => return Err(Error::InvalidArgument(format!("mixed datasets `{d}` and `{ds}`"))),
            _ => dataset = Some(ds.to_string()),
        }
        let model: ModelKind = rec[1].parse()?;
        let (metric, cutoff) = Metric::parse_csv_tag(&rec[2])?;
        if let Some(c) = cutoff {
            k = c;
        }
        let improvement_pct = if rec[5].is_empty() {
            baseline.get_or_insert(model);
            None
        } else {
            Some(num(&rec[5])?)
        };
        let stat = MetricSummary {
            metric,
            mean: num(&rec[3])?,
            ci95: num(&rec[4])?,
            improvement_pct,
        };
        match models.iter_mut().find(|m| m.model == model) {
            Some(m) => m.metrics.push(stat),
            None => models.push(ModelSummary {
                model,
                runs: 0,
                metrics: vec![stat],
            }),
        }
    }
    let dataset = dataset.ok_or_else(|| Error::InvalidArgument("empty results CSV".into()))?;
    Ok(AggregateReport {
        dataset,
        k,
        baseline: baseline.unwrap_or(ModelKind::MfBiased),
        models,
        warnings: Vec::new(),
    })
}

fn header(metric: Metric, k: usize) -> String {
    match metric {
        Metric::Rmse => "RMSE".into(),
        Metric::Auc => "AUC".into(),
        Metric::Ndcg => format!("NDCG@{k}"),
        Metric::Gini => "Gini".into(),
        Metric::Entropy => "Entropy".into(),
        Metric::TrainingTime => "Training time (s)".into(),
    }
}

fn decimals(metric: Metric) -> usize {
    if metric == Metric::TrainingTime {
        2
    } else {
        4
    }
}

/// Index of the best value in `values`, if any.
fn best(values: &[Option<f64>], higher: bool) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .reduce(|a, b| {
            let better = if higher { b.1 > a.1 } else { b.1 < a.1 };
            if better {
                b
            } else {
                a
            }
        })
        .map(|(i, _)| i)
}

fn bold_if(s: String, yes: bool) -> String {
    if yes {
        format!("**{s}**")
    } else {
        s
    }
}

/// An absolute table (mean ± CI) and an improvement table vs the baseline,
/// best value per column in bold.
pub fn to_markdown(report: &AggregateReport, skipped: &[SkipRecord]) -> String {
    let metrics: Vec<Metric> = report
        .models
        .first()
        .map(|m| m.metrics.iter().map(|s| s.metric).collect())
        .unwrap_or_default();
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", report.dataset);
    let runs: Vec<String> = report.models.iter().map(|m| m.runs.to_string()).collect();
    let _ = writeln!(out, "Mean ± 95% CI half-width (runs per model: {}).\n", runs.join(", "));

    let head: Vec<String> = metrics.iter().map(|&m| header(m, report.k)).collect();
    let _ = writeln!(out, "| Model | {} |", head.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(metrics.len()));
    let column = |models: &[&ModelSummary], metric: Metric, f: &dyn Fn(&MetricSummary) -> Option<f64>| {
        let values: Vec<Option<f64>> = models.iter().map(|m| m.get(metric).and_then(f)).collect();
        best(&values, metric.higher_is_better())
    };
    let all: Vec<&ModelSummary> = report.models.iter().collect();
    let best_abs: Vec<Option<usize>> = metrics.iter().map(|&m| column(&all, m, &|s| Some(s.mean))).collect();
    for (row, m) in all.iter().enumerate() {
        let cells: Vec<String> = metrics
            .iter()
            .zip(&best_abs)
            .map(|(&metric, b)| match m.get(metric) {
                Some(s) => {
                    let d = decimals(metric);
                    bold_if(format!("{:.d$} ± {:.d$}", s.mean, s.ci95), *b == Some(row))
                }
                None => "n/a".into(),
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", m.model.label(), cells.join(" | "));
    }

    let others: Vec<&ModelSummary> = report.models.iter().filter(|m| m.model != report.baseline).collect();
    if !others.is_empty() {
        let _ = writeln!(out, "\nChange vs {} (%).\n", report.baseline.label());
        let _ = writeln!(out, "| Model | {} |", head.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(metrics.len()));
        let best_imp: Vec<Option<usize>> = metrics
            .iter()
            .map(|&m| column(&others, m, &|s| s.improvement_pct))
            .collect();
        for (row, m) in others.iter().enumerate() {
            let cells: Vec<String> = metrics
                .iter()
                .zip(&best_imp)
                .map(|(&metric, b)| match m.get(metric).and_then(|s| s.improvement_pct) {
                    Some(v) => bold_if(format!("{v:+.2}%"), *b == Some(row)),
                    None => "n/a".into(),
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", m.model.label(), cells.join(" | "));
        }
    }

    if !skipped.is_empty() {
        let _ = writeln!(out, "\nSkipped:\n");
        for s in skipped {
            let _ = writeln!(out, "- {}: {}", s.model.label(), s.reason);
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\nWarnings:\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

pub fn emit_report(report: &AggregateReport, format: Format, path: &Path, skipped: &[SkipRecord]) -> Result<()> {
    if report.models.is_empty() {
        return Err(Error::InvalidArgument("empty report".into()));
    }
    let body = match format {
        Format::Csv => to_csv(report)?,
        Format::Markdown => to_markdown(report, skipped),
    };
    write_file(path, &body)
}

const QUALITY: [Metric; 5] = [Metric::Rmse, Metric::Auc, Metric::Ndcg, Metric::Gini, Metric::Entropy];

/// Writes `runs.csv` (quality metrics, deterministic), `runs_timing.csv`
/// and `skipped.csv` into `dir`.
pub fn write_runs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let runs = csv_string(|w| {
        let mut head = vec!["dataset".to_string(), "model".into(), "seed".into()];
        head.extend(QUALITY.iter().map(|m| m.csv_tag(outcome.k)));
        w.write_record(&head)?;
        for r in &outcome.results {
            let mut rec = vec![outcome.dataset.clone(), r.model.tag().into(), r.seed.to_string()];
            rec.extend(QUALITY.iter().map(|m| m.of(&r.metrics).to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    let timing = csv_string(|w| {
        w.write_record(["dataset", "model", "seed", "training_time"])?;
        for r in &outcome.results {
            w.write_record([
                outcome.dataset.as_str(),
                r.model.tag(),
                &r.seed.to_string(),
                &r.metrics.training_time_seconds.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let skipped = csv_string(|w| {
        w.write_record(["dataset", "model", "reason"])?;
        for s in &outcome.skipped {
            w.write_record([outcome.dataset.as_str(), s.model.tag(), &s.reason])?;
        }
        Ok(())
    })?;
    write_file(&dir.join(RUNS_FILE), &runs)?;
    write_file(&dir.join(RUNS_TIMING_FILE), &timing)?;
    write_file(&dir.join(SKIPPED_FILE), &skipped)
}

/// Reads back [`write_runs`] output. Missing timing or skip files are
/// treated as empty (training time 0).
pub fn read_runs(dir: &Path) -> Result<ExperimentOutcome> {
    let path = dir.join(RUNS_FILE);
    let text = crate::ingest::read_to_string(&path)?;
    let bad = |line: usize, msg: &str| Error::parse(&path, line, msg);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers()?.clone();
    if head.len() != 3 + QUALITY.len() || &head[0] != "dataset" || &head[1] != "model" || &head[2] != "seed" {
        return Err(bad(1, "unexpected header"));
    }
    let mut k = crate::metrics::DEFAULT_K;
    for (col, expected) in head.iter().skip(3).zip(QUALITY) {
        let (metric, cutoff) = Metric::parse_csv_tag(col)?;
        if metric != expected {
            return Err(bad(1, "unexpected metric column order"));
        }
        if let Some(c) = cutoff {
            k = c;
        }
    }
    let mut dataset = String::new();
    let mut results = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(line, "bad number"));
        dataset = rec[0].to_string();
        results.push(RunResult {
            model: rec[1].parse()?,
            seed: rec[2].parse().map_err(|_| bad(line, "bad seed"))?,
            metrics: MetricValues {
                rmse: num(3)?,
                auc: num(4)?,
                ndcg: num(5)?,
                gini: num(6)?,
                entropy: num(7)?,
                training_time_seconds: 0.0,
            },
        });
    }
    let timing_path = dir.join(RUNS_TIMING_FILE);
    if timing_path.exists() {
        let text = crate::ingest::read_to_string(&timing_path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let model: ModelKind = rec[1].parse()?;
            let seed: u64 = rec[2]
                .parse()
                .map_err(|_| Error::parse(&timing_path, n + 2, "bad seed"))?;
            let t: f64 = rec[3]
                .parse()
                .map_err(|_| Error::parse(&timing_path, n + 2, "bad number"))?;
            if let Some(res) = results.iter_mut().find(|x| x.model == model && x.seed == seed) {
                res.metrics.training_time_seconds = t;
            }
        }
    }
    let mut skipped = Vec::new();
    let skipped_path = dir.join(SKIPPED_FILE);
    if skipped_path.exists() {
        let text = crate::ingest::read_to_string(&skipped_path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        for rec in r.records() {
            let rec = rec?;
            skipped.push(SkipRecord {
                model: rec[1].parse()?,
                reason: rec[2].to_string(),
            });
        }
    }
    Ok(ExperimentOutcome {
        dataset,
        k,
        results,
        skipped,
    })
}
