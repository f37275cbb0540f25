//! Seeded repeats of every requested model.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricValues};
use crate::models::{train_model, ModelKind};

use super::config::{ExperimentConfig, LoadedData};

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub model: ModelKind,
    pub seed: u64,
    pub metrics: MetricValues,
}

/// A model that could not run on this dataset at all.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipRecord {
    pub model: ModelKind,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub dataset: String,
    pub k: usize,
    /// Ordered by repeat, then by the configured model order.
    pub results: Vec<RunResult>,
    pub skipped: Vec<SkipRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = cfg.dataset.load()?;
    run_on_data(cfg, &data)
}

/// Like [`run_experiment`] on already loaded data.
pub fn run_on_data(cfg: &ExperimentConfig, data: &LoadedData) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let has_randomized = data.randomized.as_ref().is_some_and(|r| !r.interactions.is_empty());
    let mut runnable = Vec::new();
    let mut skipped = Vec::new();
    for &m in &cfg.models {
        if m.needs_randomized() && !has_randomized {
            let reason = Error::RequiresRandomized(m.label()).to_string();
            log::warn!("skipping {m}: {reason}");
            skipped.push(SkipRecord { model: m, reason });
        } else {
            runnable.push(m);
        }
    }

    let repeat = |j: usize| -> Result<Vec<RunResult>> {
        let seed = cfg.base_seed + j as u64;
        let split = data.split(cfg.ratios, cfg.holdout, seed)?;
        runnable
            .iter()
            .map(|&m| {
                let hp = cfg.hyper_params(m);
                let started = Instant::now();
                let (model, report) = train_model(m, &split, &hp, seed, cfg.propensity)?;
                let elapsed = started.elapsed().as_secs_f64();
                let mut metrics = evaluate(&model, &split.d_te, &split.meta, cfg.k)?;
                metrics.training_time_seconds = elapsed;
                log::info!(
                    "{} seed {seed} {m}: rmse {:.4} auc {:.4} ndcg {:.4} ({} epochs, {:.2}s)",
                    data.name(),
                    metrics.rmse,
                    metrics.auc,
                    metrics.ndcg,
                    report.epochs_run,
                    elapsed
                );
                Ok(RunResult {
                    model: m,
                    seed,
                    metrics,
                })
            })
            .collect()
    };

    let per_repeat: Vec<Vec<RunResult>> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.repeats).into_par_iter().map(repeat).collect::<Result<_>>())?
    } else {
        (0..cfg.repeats).map(repeat).collect::<Result<_>>()?
    };

    Ok(ExperimentOutcome {
        dataset: data.name().to_string(),
        k: cfg.k,
        results: per_repeat.into_iter().flatten().collect(),
        skipped,
    })
}
