//! Matrix factorization and its debiasing trainers.

mod autodebias;
mod checkpoint;
mod dr;
mod grad;
mod mf;
mod objective;
mod propensity;
mod train;
mod weighted;

pub use autodebias::{
    meta_gradient, meta_loss, pairs_per_batch, train_autodebias, train_autodebias_with_hook, MetaBatch, MetaFeatures,
    MetaScratch, MetaWeights,
};
pub use checkpoint::Checkpoint;
pub use dr::{
    dr_risk, imputation_objective, train_dr, train_dr_with_hook, DrPair, ImputationGradient, ImputationModel,
    ImputationTerm,
};
pub use grad::Gradient;
pub use mf::{recommend_topk, MfModel, Scorer};
pub use objective::{dr_prediction, weighted_squared, DrTerm, WeightedTarget};
pub use propensity::{estimate_propensities, Propensities, PropensityMethod};
pub use train::{EpochRecord, HyperParams, ModelKind, TrainReport};
pub use weighted::{train_ips, train_ips_with_hook, train_mf, train_mf_with_hook, StepHook, TrainingSource};

use crate::data::{DataSplit, FeedbackKind};
use crate::error::{Error, Result};

/// Naive Bayes when the data is explicit and a randomized sample exists,
/// item popularity otherwise.
pub fn default_propensity_method(split: &DataSplit) -> PropensityMethod {
    if split.meta.kind == FeedbackKind::Explicit && split.has_randomized() {
        PropensityMethod::NaiveBayes
    } else {
        PropensityMethod::ItemPopularity
    }
}

/// Trains any of the five configurations and returns the prediction model.
pub fn train_model(
    kind: ModelKind,
    split: &DataSplit,
    hp: &HyperParams,
    seed: u64,
    propensity: Option<PropensityMethod>,
) -> Result<(MfModel, TrainReport)> {
    if kind.needs_randomized() && !split.has_randomized() {
        return Err(Error::RequiresRandomized(kind.label()));
    }
    let props = || {
        let method = propensity.unwrap_or_else(|| default_propensity_method(split));
        estimate_propensities(&split.d_t, &split.d_u, &split.meta, method, hp)
    };
    match kind {
        ModelKind::MfBiased => train_mf(split, hp, seed, TrainingSource::Biased),
        ModelKind::MfUniform => train_mf(split, hp, seed, TrainingSource::Uniform),
        ModelKind::Ips => train_ips(split, hp, seed, &props()?),
        ModelKind::Dr => train_dr(split, hp, seed, &props()?).map(|(m, _, r)| (m, r)),
        ModelKind::AutoDebias => train_autodebias(split, hp, seed).map(|(m, _, r)| (m, r)),
    }
}
