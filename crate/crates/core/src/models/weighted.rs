//! MF on D_T or D_U, and its inverse-propensity-weighted variant.

use std::time::Instant;

use crate::data::{DataSplit, Interaction};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::grad::Gradient;
use super::mf::MfModel;
use super::objective::{weighted_squared, WeightedTarget};
use super::propensity::Propensities;
use super::train::{fit, mean_rating, HyperParams, TrainReport};

/// Which part of the split plain MF learns from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingSource {
    /// D_T, the biased log.
    Biased,
    /// D_U, the small randomized sample.
    Uniform,
}

/// Called with the model after every parameter update.
pub type StepHook<'a> = &'a mut dyn FnMut(&MfModel);

pub(crate) fn train_weighted(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    rows: &[Interaction],
    weight: impl Fn(&Interaction) -> f64,
    hook: StepHook<'_>,
) -> Result<(MfModel, TrainReport)> {
    hp.validate()?;
    let started = Instant::now();
    let mut rng = SeededRng::new(seed);
    let model = MfModel::initialized(&split.meta, hp.latent_dim, mean_rating(rows), &mut rng);
    let mut grad = Gradient::for_model(&model);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut batch = Vec::with_capacity(hp.batch_size);

    let (model, (), report) = fit(split, hp, model, (), started, |model, _, _| {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(hp.batch_size) {
            let b = chunk.len() as f64;
            batch.clear();
            batch.extend(chunk.iter().map(|&k| {
                let x = &rows[k];
                WeightedTarget {
                    user: x.user,
                    item: x.item,
                    target: x.rating,
                    weight: weight(x) / b,
                    reg_weight: 1.0 / b,
                }
            }));
            grad.clear();
            total += weighted_squared(model, &batch, hp.l2_reg, Some(&mut grad));
            grad.apply(model, hp.learning_rate);
            hook(model);
            batches += 1;
        }
        Ok(total / batches as f64)
    })?;
    Ok((model, report))
}

/// Squared-error MF by mini-batch SGD, early-stopped on validation AUC.
pub fn train_mf(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    source: TrainingSource,
) -> Result<(MfModel, TrainReport)> {
    train_mf_with_hook(split, hp, seed, source, &mut |_| {})
}

pub fn train_mf_with_hook(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    source: TrainingSource,
    hook: StepHook<'_>,
) -> Result<(MfModel, TrainReport)> {
    let rows = match source {
        TrainingSource::Biased => &split.d_t,
        TrainingSource::Uniform => &split.d_u,
    };
    if rows.is_empty() {
        return Err(match source {
            TrainingSource::Biased => Error::EmptyDataset,
            TrainingSource::Uniform => Error::RequiresRandomized("MF (uniform)"),
        });
    }
    train_weighted(split, hp, seed, rows, |_| 1.0, hook)
}

/// MF on D_T with each example's loss divided by its propensity.
///
/// Weights are normalized to average 1 over D_T.
pub fn train_ips(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    props: &Propensities,
) -> Result<(MfModel, TrainReport)> {
    train_ips_with_hook(split, hp, seed, props, &mut |_| {})
}

pub fn train_ips_with_hook(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    props: &Propensities,
    hook: StepHook<'_>,
) -> Result<(MfModel, TrainReport)> {
    if split.d_t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    props.check(split.meta.num_items)?;
    // scaled to mean 1 over D_T; a constant factor leaves the minimizer
    // unchanged and keeps the step size comparable to plain MF
    let inv = |x: &Interaction| 1.0 / props.get(x.user, x.item, x.rating);
    let scale = split.d_t.len() as f64 / split.d_t.iter().map(inv).sum::<f64>();
    train_weighted(split, hp, seed, &split.d_t, |x| inv(x) * scale, hook)
}
