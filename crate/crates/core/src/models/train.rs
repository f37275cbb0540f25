//! Hyperparameters, training reports and the epoch loop with early stopping.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::metrics::model_auc;

use super::mf::MfModel;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub propensity_floor: f64,
    pub propensity_power: f64,
    pub imputation_learning_rate: f64,
    pub meta_learning_rate: f64,
    /// Scale of the sampled all-pairs term (DR and the meta-weighted trainer).
    pub imputation_weight: f64,
    pub all_pairs_sample_rate: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            learning_rate: 0.3,
            l2_reg: 0.01,
            batch_size: 16,
            max_epochs: 80,
            patience: 15,
            propensity_floor: 0.05,
            propensity_power: 1.0,
            imputation_learning_rate: 0.05,
            meta_learning_rate: 0.1,
            imputation_weight: 1.0,
            all_pairs_sample_rate: 0.05,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::HyperParam(msg.to_string()));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if self.latent_dim == 0 {
            return fail("latent_dim must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be >= 1");
        }
        if !pos(self.learning_rate) {
            return fail("learning_rate must be > 0");
        }
        if !nonneg(self.l2_reg) {
            return fail("l2_reg must be >= 0");
        }
        if !(self.propensity_floor > 0.0 && self.propensity_floor <= 1.0) {
            return fail("propensity_floor must be in (0, 1]");
        }
        if !nonneg(self.propensity_power) {
            return fail("propensity_power must be >= 0");
        }
        if !pos(self.imputation_learning_rate) {
            return fail("imputation_learning_rate must be > 0");
        }
        if !nonneg(self.meta_learning_rate) {
            return fail("meta_learning_rate must be >= 0");
        }
        if !nonneg(self.imputation_weight) {
            return fail("imputation_weight must be >= 0");
        }
        if !(self.all_pairs_sample_rate > 0.0 && self.all_pairs_sample_rate <= 1.0) {
            return fail("all_pairs_sample_rate must be in (0, 1]");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::HyperParam(format!("bad value for {key}: `{value}`")))
        }
        match key {
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "l2_reg" => self.l2_reg = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "propensity_floor" => self.propensity_floor = parse(key, value)?,
            "propensity_power" => self.propensity_power = parse(key, value)?,
            "imputation_learning_rate" => self.imputation_learning_rate = parse(key, value)?,
            "meta_learning_rate" => self.meta_learning_rate = parse(key, value)?,
            "imputation_weight" => self.imputation_weight = parse(key, value)?,
            "all_pairs_sample_rate" => self.all_pairs_sample_rate = parse(key, value)?,
            _ => return Err(Error::HyperParam(format!("unknown hyperparameter `{key}`"))),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("latent_dim", self.latent_dim.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("l2_reg", self.l2_reg.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("propensity_floor", self.propensity_floor.to_string()),
            ("propensity_power", self.propensity_power.to_string()),
            ("imputation_learning_rate", self.imputation_learning_rate.to_string()),
            ("meta_learning_rate", self.meta_learning_rate.to_string()),
            ("imputation_weight", self.imputation_weight.to_string()),
            ("all_pairs_sample_rate", self.all_pairs_sample_rate.to_string()),
        ]
    }
}

/// The five model configurations a benchmark can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    MfUniform,
    MfBiased,
    Ips,
    Dr,
    AutoDebias,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::MfUniform,
        ModelKind::MfBiased,
        ModelKind::Ips,
        ModelKind::Dr,
        ModelKind::AutoDebias,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::MfUniform => "mf-uniform",
            ModelKind::MfBiased => "mf-biased",
            ModelKind::Ips => "ips",
            ModelKind::Dr => "dr",
            ModelKind::AutoDebias => "autodebias",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::MfUniform => "MF (uniform)",
            ModelKind::MfBiased => "MF (biased)",
            ModelKind::Ips => "IPS",
            ModelKind::Dr => "DR",
            ModelKind::AutoDebias => "AutoDebias",
        }
    }

    pub fn needs_randomized(self) -> bool {
        matches!(self, ModelKind::MfUniform | ModelKind::Dr | ModelKind::AutoDebias)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.tag() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (the last one if AUC was undefined).
    pub best_epoch: usize,
    /// `None` when D_V cannot define an AUC (empty, or one label only).
    pub best_validation_auc: Option<f64>,
    pub wall_time_seconds: f64,
    pub loss_curve: Vec<EpochRecord>,
}

/// Runs `epoch` up to `max_epochs` times, tracking validation AUC on D_V.
///
/// Keeps the parameters (model plus any auxiliary `state`) of the best
/// epoch and stops once `patience` epochs pass without improvement.
pub(crate) fn fit<S: Clone>(
    split: &DataSplit,
    hp: &HyperParams,
    mut model: MfModel,
    mut state: S,
    started: Instant,
    mut epoch: impl FnMut(&mut MfModel, &mut S, usize) -> Result<f64>,
) -> Result<(MfModel, S, TrainReport)> {
    let mut best: Option<(f64, usize, MfModel, S)> = None;
    let mut curve = Vec::new();
    for e in 1..=hp.max_epochs {
        let loss = epoch(&mut model, &mut state, e)?;
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged { epoch: e });
        }
        let auc = if split.d_v.is_empty() {
            None
        } else {
            model_auc(&model, &split.d_v, &split.meta).ok()
        };
        log::debug!("epoch {e}: loss {loss:.6} val_auc {auc:?}");
        curve.push(EpochRecord {
            epoch: e,
            train_loss: loss,
            validation_auc: auc,
        });
        if let Some(a) = auc {
            match &best {
                Some((b, best_epoch, _, _)) if a <= *b => {
                    if e - best_epoch >= hp.patience {
                        break;
                    }
                }
                _ => best = Some((a, e, model.clone(), state.clone())),
            }
        }
    }
    let epochs_run = curve.len();
    let (model, state, best_epoch, best_auc) = match best {
        Some((a, e, m, s)) => (m, s, e, Some(a)),
        None => (model, state, epochs_run, None),
    };
    let report = TrainReport {
        epochs_run,
        best_epoch,
        best_validation_auc: best_auc,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        loss_curve: curve,
    };
    Ok((model, state, report))
}

pub(crate) fn mean_rating(rows: &[crate::data::Interaction]) -> f64 {
    rows.iter().map(|x| x.rating).sum::<f64>() / rows.len() as f64
}
