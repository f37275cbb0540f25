//! Means, 95% confidence half-widths and improvement over MF (biased).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::ModelKind;

use super::run::RunResult;

/// Normal-approximation multiplier for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rmse,
    Auc,
    Ndcg,
    Gini,
    Entropy,
    TrainingTime,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Rmse,
        Metric::Auc,
        Metric::Ndcg,
        Metric::Gini,
        Metric::Entropy,
        Metric::TrainingTime,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Auc => "auc",
            Metric::Ndcg => "ndcg",
            Metric::Gini => "gini",
            Metric::Entropy => "entropy",
            Metric::TrainingTime => "training_time",
        }
    }

    /// Column name in CSV files; NDCG carries its cutoff.
    pub fn csv_tag(self, k: usize) -> String {
        match self {
            Metric::Ndcg => format!("ndcg@{k}"),
            m => m.tag().to_string(),
        }
    }

    /// Inverse of [`Metric::csv_tag`].
    pub fn parse_csv_tag(s: &str) -> Result<(Metric, Option<usize>)> {
        if let Some(k) = s.strip_prefix("ndcg@") {
            let k = k
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad NDCG cutoff in `{s}`")))?;
            return Ok((Metric::Ndcg, Some(k)));
        }
        Ok((s.parse()?, None))
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Auc | Metric::Ndcg | Metric::Entropy)
    }

    pub fn of(self, m: &crate::metrics::MetricValues) -> f64 {
        match self {
            Metric::Rmse => m.rmse,
            Metric::Auc => m.auc,
            Metric::Ndcg => m.ndcg,
            Metric::Gini => m.gini,
            Metric::Entropy => m.entropy,
            Metric::TrainingTime => m.training_time_seconds,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: f64,
    pub ci95: f64,
    /// Percent change of the mean vs the baseline; `None` for the baseline
    /// itself and when the baseline mean is zero.
    pub improvement_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub runs: usize,
    pub metrics: Vec<MetricSummary>,
}

impl ModelSummary {
    pub fn get(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|s| s.metric == metric)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub dataset: String,
    /// Cutoff of the NDCG column.
    pub k: usize,
    pub baseline: ModelKind,
    pub models: Vec<ModelSummary>,
    pub warnings: Vec<String>,
}

impl AggregateReport {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == kind)
    }
}

/// `(mean, 1.96 * sd / sqrt(n))` with the sample (n - 1) standard deviation;
/// the half-width is 0 for a single value.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * var.sqrt() / n.sqrt())
}

/// `(method - baseline) / baseline * 100`, undefined for a zero baseline.
pub fn improvement_pct(method: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (method - baseline) / baseline * 100.0)
}

/// Aggregates per-run metrics for the given metric set. Models appear in
/// the fixed table order (MF uniform, MF biased, IPS, DR, AutoDebias).
pub fn aggregate_metrics(
    dataset: &str,
    k: usize,
    results: &[RunResult],
    baseline: ModelKind,
    metrics: &[Metric],
) -> Result<AggregateReport> {
    if !results.iter().any(|r| r.model == baseline) {
        return Err(Error::InvalidArgument(format!(
            "baseline {baseline} missing from results"
        )));
    }
    let mut warnings = Vec::new();
    let mut summaries = Vec::new();
    let mut base_means = Vec::new();
    for kind in ModelKind::ALL {
        let runs: Vec<&RunResult> = results.iter().filter(|r| r.model == kind).collect();
        if runs.is_empty() {
            continue;
        }
        if runs.len() == 1 {
            warnings.push(format!("{kind}: a single run, 95% CI reported as 0"));
        }
        let stats: Vec<MetricSummary> = metrics
            .iter()
            .map(|&metric| {
                let values: Vec<f64> = runs.iter().map(|r| metric.of(&r.metrics)).collect();
                let (mean, ci95) = mean_ci(&values);
                MetricSummary {
                    metric,
                    mean,
                    ci95,
                    improvement_pct: None,
                }
            })
            .collect();
        if kind == baseline {
            base_means = stats.iter().map(|s| s.mean).collect();
        }
        summaries.push(ModelSummary {
            model: kind,
            runs: runs.len(),
            metrics: stats,
        });
    }
    for s in summaries.iter_mut().filter(|s| s.model != baseline) {
        for (stat, &base) in s.metrics.iter_mut().zip(&base_means) {
            stat.improvement_pct = improvement_pct(stat.mean, base);
        }
    }
    Ok(AggregateReport {
        dataset: dataset.to_string(),
        k,
        baseline,
        models: summaries,
        warnings,
    })
}

/// All six metrics against MF (biased).
pub fn aggregate(dataset: &str, k: usize, results: &[RunResult]) -> Result<AggregateReport> {
    aggregate_metrics(dataset, k, results, ModelKind::MfBiased, &Metric::ALL)
}
