//! Doubly robust joint learning: an imputation model for the error of
//! unobserved pairs, corrected on observed pairs by inverse propensity.

use std::time::Instant;

use crate::data::{DataSplit, Interaction};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::autodebias::pairs_per_batch;
use super::grad::Gradient;
use super::mf::MfModel;
use super::objective::{dr_prediction, DrTerm};
use super::propensity::Propensities;
use super::train::{fit, mean_rating, HyperParams, TrainReport};
use super::weighted::StepHook;

/// Imputed rating `clamp(global + item_offset[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputationModel {
    pub global: f64,
    pub item_offset: Vec<f64>,
    pub rating_min: f64,
    pub rating_max: f64,
}

impl ImputationModel {
    pub fn new(num_items: usize, global: f64, rating_min: f64, rating_max: f64) -> Self {
        Self {
            global,
            item_offset: vec![0.0; num_items],
            rating_min,
            rating_max,
        }
    }

    #[inline]
    pub fn raw(&self, item: usize) -> f64 {
        self.global + self.item_offset[item]
    }

    #[inline]
    pub fn impute(&self, item: usize) -> f64 {
        self.raw(item).clamp(self.rating_min, self.rating_max)
    }
}

/// Gradient w.r.t. the imputation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputationGradient {
    pub global: f64,
    pub item_offset: Vec<f64>,
}

/// One term of the imputation objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImputationTerm {
    /// `weight * (e - e_hat)^2` on a D_T row, with the model score fixed.
    Observed {
        user: usize,
        item: usize,
        rating: f64,
        weight: f64,
    },
    /// `weight * (r_tilde - r)^2` on a D_U row.
    Supervised { item: usize, rating: f64, weight: f64 },
}

/// Imputation loss and gradient. The clamp on `r_tilde` is passed through
/// (its derivative is taken as 1), so parameters never stall at a bound.
pub fn imputation_objective(
    imp: &ImputationModel,
    model: &MfModel,
    batch: &[ImputationTerm],
    mut grad: Option<&mut ImputationGradient>,
) -> f64 {
    let mut loss = 0.0;
    for term in batch {
        let (item, value, d_tilde) = match *term {
            ImputationTerm::Observed {
                user,
                item,
                rating,
                weight,
            } => {
                let s = model.raw_score(user, item);
                let tilde = imp.impute(item);
                let diff = (s - rating).powi(2) - (s - tilde).powi(2);
                // d e_hat / d r_tilde = -2 (s - r_tilde)
                (item, weight * diff * diff, weight * 2.0 * diff * 2.0 * (s - tilde))
            }
            ImputationTerm::Supervised { item, rating, weight } => {
                let d = imp.impute(item) - rating;
                (item, weight * d * d, 2.0 * weight * d)
            }
        };
        loss += value;
        if let Some(g) = grad.as_deref_mut() {
            g.global += d_tilde;
            g.item_offset[item] += d_tilde;
        }
    }
    loss
}

/// One pair's contribution to the DR risk estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrPair {
    /// `e = (r_hat - r)^2`; only read when `observed`.
    pub error: f64,
    pub imputed_error: f64,
    pub observed: bool,
    pub propensity: f64,
}

/// `mean over pairs of e_hat + o * (e - e_hat) / p`.
pub fn dr_risk(pairs: &[DrPair]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| {
            if p.observed {
                p.imputed_error + (p.error - p.imputed_error) / p.propensity
            } else {
                p.imputed_error
            }
        })
        .sum();
    total / pairs.len() as f64
}

enum Slot {
    Observed(usize),
    Supervised(usize),
}

pub fn train_dr(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    props: &Propensities,
) -> Result<(MfModel, ImputationModel, TrainReport)> {
    train_dr_with_hook(split, hp, seed, props, &mut |_| {})
}

pub fn train_dr_with_hook(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    props: &Propensities,
    hook: StepHook<'_>,
) -> Result<(MfModel, ImputationModel, TrainReport)> {
    hp.validate()?;
    if split.d_u.is_empty() {
        return Err(Error::RequiresRandomized("DR"));
    }
    if split.d_t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    props.check(split.meta.num_items)?;
    let started = Instant::now();
    let meta = &split.meta;
    let mut rng = SeededRng::new(seed);
    let model = MfModel::initialized(meta, hp.latent_dim, mean_rating(&split.d_t), &mut rng);
    let imputation = ImputationModel::new(
        meta.num_items,
        mean_rating(&split.d_u),
        meta.rating_min,
        meta.rating_max,
    );

    // propensities are relative; scaling by their mean over all pairs makes
    // the observed weights average about 1, so a batch mean of
    // c / p * (e - e_hat) estimates the full-matrix correction term
    let calib = props.mean_over_pairs();
    let inv_p: Vec<f64> = split
        .d_t
        .iter()
        .map(|x| calib / props.get(x.user, x.item, x.rating))
        .collect();
    let n_obs = split.d_t.len();
    let n_sup = split.d_u.len();
    let n_pairs = pairs_per_batch(hp, meta, n_obs);
    let mut obs_order: Vec<usize> = (0..n_obs).collect();

    let mut grad = Gradient::for_model(&model);
    let mut imp_grad = ImputationGradient {
        global: 0.0,
        item_offset: vec![0.0; meta.num_items],
    };
    let mut slots: Vec<Slot> = Vec::new();
    let mut imp_batch = Vec::with_capacity(hp.batch_size);
    let mut pred_batch = Vec::with_capacity(hp.batch_size);

    let (model, imputation, report) = fit(split, hp, model, imputation, started, |model, imp, _| {
        // (a) imputation step with the prediction model fixed
        slots.clear();
        slots.extend((0..n_obs).map(Slot::Observed));
        slots.extend((0..n_sup).map(Slot::Supervised));
        rng.shuffle(&mut slots);
        let n = (n_obs + n_sup) as f64;
        for chunk in slots.chunks(hp.batch_size) {
            let b = chunk.len() as f64;
            imp_batch.clear();
            imp_batch.extend(chunk.iter().map(|slot| match *slot {
                Slot::Observed(k) => {
                    let x: &Interaction = &split.d_t[k];
                    ImputationTerm::Observed {
                        user: x.user,
                        item: x.item,
                        rating: x.rating,
                        weight: inv_p[k] * n / n_obs as f64 / b,
                    }
                }
                Slot::Supervised(k) => {
                    let x = &split.d_u[k];
                    ImputationTerm::Supervised {
                        item: x.item,
                        rating: x.rating,
                        weight: n / n_sup as f64 / b,
                    }
                }
            }));
            imp_grad.global = 0.0;
            imp_grad.item_offset.fill(0.0);
            imputation_objective(imp, model, &imp_batch, Some(&mut imp_grad));
            imp.global -= hp.imputation_learning_rate * imp_grad.global;
            for (o, g) in imp.item_offset.iter_mut().zip(&imp_grad.item_offset) {
                *o -= hp.imputation_learning_rate * g;
            }
        }

        // (b) prediction step: each batch is a DR estimate over its observed
        // rows plus freshly sampled pairs
        rng.shuffle(&mut obs_order);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in obs_order.chunks(hp.batch_size) {
            let b = chunk.len() as f64;
            pred_batch.clear();
            pred_batch.extend(chunk.iter().map(|&k| {
                let x = &split.d_t[k];
                DrTerm::Observed {
                    user: x.user,
                    item: x.item,
                    rating: x.rating,
                    imputed: imp.impute(x.item),
                    weight: inv_p[k] / b,
                    reg_weight: 1.0 / b,
                }
            }));
            for _ in 0..n_pairs {
                let u = rng.below(meta.num_users);
                let i = rng.below(meta.num_items);
                pred_batch.push(DrTerm::Pair {
                    user: u,
                    item: i,
                    imputed: imp.impute(i),
                    weight: hp.imputation_weight / n_pairs as f64,
                    reg_weight: 0.0,
                });
            }
            grad.clear();
            total += dr_prediction(model, &pred_batch, hp.l2_reg, Some(&mut grad));
            grad.apply(model, hp.learning_rate);
            hook(model);
            batches += 1;
        }
        if !(imp.global.is_finite() && imp.item_offset.iter().all(|x| x.is_finite())) {
            return Ok(f64::NAN);
        }
        Ok(total / batches as f64)
    })?;
    Ok((model, imputation, report))
}
