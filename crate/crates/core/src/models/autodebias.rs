//! Meta-learned example weights and pseudo-labels, fitted so that one SGD
//! step on the weighted biased loss lowers the loss on randomized data.

use std::time::Instant;

use crate::data::{DataSplit, DatasetMeta, Interaction};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::grad::Gradient;
use super::mf::MfModel;
use super::objective::{weighted_squared, WeightedTarget};
use super::train::{fit, mean_rating, HyperParams, TrainReport};
use super::weighted::StepHook;

const BUCKETS: usize = 5;
const LOGIT_LIMIT: f64 = 20.0;

/// Bucketed meta-features. Observed triples use user-activity quintile,
/// item-popularity quintile and rating level; arbitrary pairs drop the rating.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaFeatures {
    pub user_bucket: Vec<usize>,
    pub item_bucket: Vec<usize>,
    pub rating_min: f64,
    pub levels: usize,
}

fn quintiles(counts: &[usize]) -> Vec<usize> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let cuts: Vec<usize> = (1..BUCKETS).map(|k| sorted[k * n / BUCKETS]).collect();
    counts
        .iter()
        .map(|&c| cuts.iter().filter(|&&cut| cut <= c).count())
        .collect()
}

impl MetaFeatures {
    pub fn from_log(d_t: &[Interaction], meta: &DatasetMeta) -> Self {
        let mut users = vec![0; meta.num_users];
        let mut items = vec![0; meta.num_items];
        for x in d_t {
            users[x.user] += 1;
            items[x.item] += 1;
        }
        Self {
            user_bucket: quintiles(&users),
            item_bucket: quintiles(&items),
            rating_min: meta.rating_min,
            levels: meta.rating_levels().len().max(1),
        }
    }

    pub fn observed_dim(&self) -> usize {
        2 * BUCKETS + self.levels
    }

    pub fn pair_dim(&self) -> usize {
        2 * BUCKETS
    }

    /// Active one-hot positions of `x_ui`.
    pub fn observed(&self, u: usize, i: usize, rating: f64) -> [usize; 3] {
        let level = ((rating - self.rating_min).round().max(0.0) as usize).min(self.levels - 1);
        [self.user_bucket[u], BUCKETS + self.item_bucket[i], 2 * BUCKETS + level]
    }

    /// Active one-hot positions of `x'_ui`.
    pub fn pair(&self, u: usize, i: usize) -> [usize; 2] {
        [self.user_bucket[u], BUCKETS + self.item_bucket[i]]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sum_at(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&k| v[k]).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaWeights {
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub m: Vec<f64>,
    pub rating_min: f64,
    pub rating_max: f64,
}

impl MetaWeights {
    pub fn zeros(features: &MetaFeatures, meta: &DatasetMeta) -> Self {
        Self {
            phi1: vec![0.0; features.observed_dim()],
            phi2: vec![0.0; features.pair_dim()],
            m: vec![0.0; features.pair_dim()],
            rating_min: meta.rating_min,
            rating_max: meta.rating_max,
        }
    }

    /// `w1 = exp(phi1 . x)`, logit clamped to keep it finite.
    pub fn w1(&self, f: &MetaFeatures, u: usize, i: usize, rating: f64) -> f64 {
        sum_at(&self.phi1, &f.observed(u, i, rating))
            .clamp(-LOGIT_LIMIT, LOGIT_LIMIT)
            .exp()
    }

    pub fn w2(&self, f: &MetaFeatures, u: usize, i: usize) -> f64 {
        sum_at(&self.phi2, &f.pair(u, i)).clamp(-LOGIT_LIMIT, LOGIT_LIMIT).exp()
    }

    fn sigma(&self, f: &MetaFeatures, u: usize, i: usize) -> f64 {
        sigmoid(sum_at(&self.m, &f.pair(u, i)))
    }

    /// `m_ui = min + (max - min) * sigmoid(m . x')`.
    pub fn pseudo_label(&self, f: &MetaFeatures, u: usize, i: usize) -> f64 {
        self.rating_min + (self.rating_max - self.rating_min) * self.sigma(f, u, i)
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.iter().chain(&self.phi2).chain(&self.m).all(|x| x.is_finite())
    }

    fn to_flat(&self) -> Vec<f64> {
        self.phi1.iter().chain(&self.phi2).chain(&self.m).copied().collect()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let (a, rest) = flat.split_at(self.phi1.len());
        let (b, c) = rest.split_at(self.phi2.len());
        self.phi1.copy_from_slice(a);
        self.phi2.copy_from_slice(b);
        self.m.copy_from_slice(c);
    }

    /// All parameters in `phi1, phi2, m` order.
    pub fn params(&self) -> Vec<f64> {
        self.to_flat()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        self.set_flat(flat)
    }
}

/// One meta-iteration's data: a D_T batch, sampled pairs and a D_U batch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetaBatch {
    pub observed: Vec<(usize, usize, f64)>,
    pub pairs: Vec<(usize, usize)>,
    pub uniform: Vec<(usize, usize, f64)>,
}

/// L_T terms. Weights are normalized within the batch: observed rows get
/// `w1 / sum(w1)`, pairs `imputation_weight * w2 / sum(w2)`, so the meta
/// step can shift weight between examples but not rescale the whole step.
/// Only the observed terms carry the L2 penalty.
fn inner_targets(
    w: &MetaWeights,
    f: &MetaFeatures,
    batch: &MetaBatch,
    imputation_weight: f64,
    out: &mut Vec<WeightedTarget>,
) {
    out.clear();
    let b = batch.observed.len() as f64;
    let w1: Vec<f64> = batch.observed.iter().map(|&(u, i, r)| w.w1(f, u, i, r)).collect();
    let w2: Vec<f64> = batch.pairs.iter().map(|&(u, i)| w.w2(f, u, i)).collect();
    let s1: f64 = w1.iter().sum();
    let s2: f64 = w2.iter().sum();
    out.extend(batch.observed.iter().zip(&w1).map(|(&(u, i, r), wj)| WeightedTarget {
        user: u,
        item: i,
        target: r,
        weight: wj / s1,
        reg_weight: 1.0 / b,
    }));
    out.extend(batch.pairs.iter().zip(&w2).map(|(&(u, i), wk)| WeightedTarget {
        user: u,
        item: i,
        target: w.pseudo_label(f, u, i),
        weight: imputation_weight * wk / s2,
        reg_weight: 0.0,
    }));
}

/// Reusable buffers for the meta step.
pub struct MetaScratch {
    g: Gradient,
    v: Gradient,
    targets: Vec<WeightedTarget>,
    pu: Vec<f64>,
    qi: Vec<f64>,
}

impl MetaScratch {
    pub fn new(model: &MfModel) -> Self {
        Self {
            g: Gradient::for_model(model),
            v: Gradient::for_model(model),
            targets: Vec::new(),
            pu: vec![0.0; model.dim],
            qi: vec![0.0; model.dim],
        }
    }

    /// `L_U(theta')` with `theta' = theta - lr * grad L_T(theta | w)`.
    pub fn meta_loss(
        &mut self,
        model: &MfModel,
        w: &MetaWeights,
        f: &MetaFeatures,
        batch: &MetaBatch,
        hp: &HyperParams,
    ) -> f64 {
        inner_targets(w, f, batch, hp.imputation_weight, &mut self.targets);
        self.g.clear();
        weighted_squared(model, &self.targets, hp.l2_reg, Some(&mut self.g));
        let n = batch.uniform.len() as f64;
        batch
            .uniform
            .iter()
            .map(|&(u, i, r)| (self.g.stepped_score(model, u, i, hp.learning_rate) - r).powi(2))
            .sum::<f64>()
            / n
    }

    /// `L_U(theta')` and its gradient w.r.t. the meta parameters, returned in
    /// [`MetaWeights::params`] order.
    pub fn meta_gradient(
        &mut self,
        model: &MfModel,
        w: &MetaWeights,
        f: &MetaFeatures,
        batch: &MetaBatch,
        hp: &HyperParams,
    ) -> (f64, Vec<f64>) {
        let lr = hp.learning_rate;
        let loss = self.meta_loss(model, w, f, batch, hp);

        // v = grad of L_U at theta'
        self.v.clear();
        let n = batch.uniform.len() as f64;
        for &(u, i, r) in &batch.uniform {
            let s = self.g.stepped_score(model, u, i, lr);
            self.g.stepped_user(model, u, lr, &mut self.pu);
            self.g.stepped_item(model, i, lr, &mut self.qi);
            self.v.add_score_grad(u, i, 2.0 * (s - r) / n, &self.pu, &self.qi);
        }

        // With normalized weights a_j = w_j / S, d a_j / d phi = a_j (x_j - xbar)
        // where xbar = sum_l a_l x_l.
        let (n1, n2) = (w.phi1.len(), w.phi2.len());
        let mut out = vec![0.0; n1 + 2 * n2];
        let n_obs = batch.observed.len();
        let (obs, pairs) = self.targets.split_at(n_obs);
        let mut mass = 0.0;
        for (t, &(u, i, r)) in obs.iter().zip(&batch.observed) {
            let c = self.v.dot_score_grad(model, u, i);
            let s = model.raw_score(u, i);
            let a = -lr * c * 2.0 * (s - r) * t.weight;
            mass += a;
            for k in f.observed(u, i, r) {
                out[k] += a;
            }
        }
        for (t, &(u, i, r)) in obs.iter().zip(&batch.observed) {
            for k in f.observed(u, i, r) {
                out[k] -= mass * t.weight;
            }
        }
        let total2: f64 = pairs.iter().map(|t| t.weight).sum();
        let span = w.rating_max - w.rating_min;
        let mut mass = 0.0;
        for (t, &(u, i)) in pairs.iter().zip(&batch.pairs) {
            let c = self.v.dot_score_grad(model, u, i);
            let s = model.raw_score(u, i);
            let sig = w.sigma(f, u, i);
            let a = -lr * c * 2.0 * (s - t.target) * t.weight;
            mass += a;
            let d_m = -lr * c * t.weight * -2.0 * span * sig * (1.0 - sig);
            for k in f.pair(u, i) {
                out[n1 + k] += a;
                out[n1 + n2 + k] += d_m;
            }
        }
        if total2 > 0.0 {
            for (t, &(u, i)) in pairs.iter().zip(&batch.pairs) {
                for k in f.pair(u, i) {
                    out[n1 + k] -= mass * t.weight / total2;
                }
            }
        }
        (loss, out)
    }
}

/// Meta-gradient check entry point; allocates fresh buffers.
pub fn meta_gradient(
    model: &MfModel,
    w: &MetaWeights,
    f: &MetaFeatures,
    batch: &MetaBatch,
    hp: &HyperParams,
) -> (f64, Vec<f64>) {
    MetaScratch::new(model).meta_gradient(model, w, f, batch, hp)
}

pub fn meta_loss(model: &MfModel, w: &MetaWeights, f: &MetaFeatures, batch: &MetaBatch, hp: &HyperParams) -> f64 {
    MetaScratch::new(model).meta_loss(model, w, f, batch, hp)
}

/// Cycles through D_U in batches, reshuffling at each wrap.
struct UniformCycle<'a> {
    rows: &'a [Interaction],
    order: Vec<usize>,
    pos: usize,
    rng: SeededRng,
}

impl<'a> UniformCycle<'a> {
    fn new(rows: &'a [Interaction], mut rng: SeededRng) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        rng.shuffle(&mut order);
        Self {
            rows,
            order,
            pos: 0,
            rng,
        }
    }

    fn fill(&mut self, n: usize, out: &mut Vec<(usize, usize, f64)>) {
        out.clear();
        for _ in 0..n.min(self.rows.len()) {
            if self.pos == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            let x = &self.rows[self.order[self.pos]];
            out.push((x.user, x.item, x.rating));
            self.pos += 1;
        }
    }
}

/// Number of all-pairs samples per mini-batch.
pub fn pairs_per_batch(hp: &HyperParams, meta: &DatasetMeta, num_observed: usize) -> usize {
    let batches = num_observed.div_ceil(hp.batch_size).max(1);
    ((hp.all_pairs_sample_rate * meta.num_pairs() as f64 / batches as f64).round() as usize).max(1)
}

pub fn train_autodebias(split: &DataSplit, hp: &HyperParams, seed: u64) -> Result<(MfModel, MetaWeights, TrainReport)> {
    train_autodebias_with_hook(split, hp, seed, &mut |_| {})
}

pub fn train_autodebias_with_hook(
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    hook: StepHook<'_>,
) -> Result<(MfModel, MetaWeights, TrainReport)> {
    hp.validate()?;
    if split.d_u.is_empty() {
        return Err(Error::RequiresRandomized("AutoDebias"));
    }
    if split.d_t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = Instant::now();
    let meta = &split.meta;
    let mut rng = SeededRng::new(seed);
    let model = MfModel::initialized(meta, hp.latent_dim, mean_rating(&split.d_t), &mut rng);
    let features = MetaFeatures::from_log(&split.d_t, meta);
    let weights = MetaWeights::zeros(&features, meta);
    let mut uniform = UniformCycle::new(&split.d_u, SeededRng::derive(seed, 1));
    let mut scratch = MetaScratch::new(&model);
    let mut grad = Gradient::for_model(&model);
    let mut targets = Vec::new();
    let mut batch = MetaBatch::default();
    let mut order: Vec<usize> = (0..split.d_t.len()).collect();
    let n_s = pairs_per_batch(hp, meta, split.d_t.len());

    let (model, weights, report) = fit(split, hp, model, weights, started, |model, w, _| {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(hp.batch_size) {
            batch.observed.clear();
            batch.observed.extend(chunk.iter().map(|&k| {
                let x = &split.d_t[k];
                (x.user, x.item, x.rating)
            }));
            batch.pairs.clear();
            for _ in 0..n_s {
                let u = rng.below(meta.num_users);
                let i = rng.below(meta.num_items);
                batch.pairs.push((u, i));
            }

            if hp.meta_learning_rate > 0.0 {
                uniform.fill(hp.batch_size, &mut batch.uniform);
                let (_, g) = scratch.meta_gradient(model, w, &features, &batch, hp);
                let mut flat = w.to_flat();
                for (p, d) in flat.iter_mut().zip(&g) {
                    *p -= hp.meta_learning_rate * d;
                }
                w.set_flat(&flat);
            }

            inner_targets(w, &features, &batch, hp.imputation_weight, &mut targets);
            grad.clear();
            total += weighted_squared(model, &targets, hp.l2_reg, Some(&mut grad));
            grad.apply(model, hp.learning_rate);
            hook(model);
            batches += 1;
        }
        if !w.is_finite() {
            return Ok(f64::NAN);
        }
        Ok(total / batches as f64)
    })?;
    Ok((model, weights, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintile_cuts() {
        let counts: Vec<usize> = (0..10).collect();
        assert_eq!(quintiles(&counts), vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(quintiles(&[3, 3, 3]), vec![4, 4, 4]);
    }

    #[test]
    fn zero_weights_are_neutral() {
        let meta = DatasetMeta {
            name: "t".into(),
            num_users: 2,
            num_items: 2,
            kind: crate::data::FeedbackKind::Explicit,
            rating_min: 1.0,
            rating_max: 5.0,
        };
        let f = MetaFeatures::from_log(&[], &meta);
        let w = MetaWeights::zeros(&f, &meta);
        assert_eq!(f.observed_dim(), 15);
        assert_eq!(w.w1(&f, 0, 1, 5.0), 1.0);
        assert_eq!(w.w2(&f, 1, 0), 1.0);
        assert_eq!(w.pseudo_label(&f, 0, 0), 3.0);
    }
}
