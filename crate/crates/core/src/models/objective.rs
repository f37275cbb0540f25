//! Mini-batch objectives and their analytic gradients.
//!
//! Each function returns the batch loss and, when given a buffer, adds the
//! gradient of exactly that loss. Weights carry any normalisation, so a
//! plain mean over `B` examples uses weight `1 / B`.

use super::grad::Gradient;
use super::mf::MfModel;

#[inline]
fn reg_norm(m: &MfModel, u: usize, i: usize) -> f64 {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    sq(m.user_vec(u)) + sq(m.item_vec(i)) + m.user_bias[u].powi(2) + m.item_bias[i].powi(2)
}

/// One term `weight * (score - target)^2 + reg_weight * l2 * |theta_ui|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedTarget {
    pub user: usize,
    pub item: usize,
    pub target: f64,
    pub weight: f64,
    pub reg_weight: f64,
}

pub fn weighted_squared(m: &MfModel, batch: &[WeightedTarget], l2: f64, mut grad: Option<&mut Gradient>) -> f64 {
    let mut loss = 0.0;
    for ex in batch {
        let s = m.raw_score(ex.user, ex.item);
        let diff = s - ex.target;
        let reg = ex.reg_weight * l2;
        loss += ex.weight * diff * diff + reg * reg_norm(m, ex.user, ex.item);
        if let Some(g) = grad.as_deref_mut() {
            g.add_example(m, ex.user, ex.item, 2.0 * ex.weight * diff, reg);
        }
    }
    loss
}

/// Terms of the doubly robust prediction objective.
///
/// Observed: `weight * (e - e_hat)` with `e = (s - r)^2`, `e_hat = (s - r_tilde)^2`.
/// Pair: `weight * e_hat`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DrTerm {
    Observed {
        user: usize,
        item: usize,
        rating: f64,
        imputed: f64,
        weight: f64,
        reg_weight: f64,
    },
    Pair {
        user: usize,
        item: usize,
        imputed: f64,
        weight: f64,
        reg_weight: f64,
    },
}

pub fn dr_prediction(m: &MfModel, batch: &[DrTerm], l2: f64, mut grad: Option<&mut Gradient>) -> f64 {
    let mut loss = 0.0;
    for term in batch {
        let (u, i, value, dscore, reg_weight) = match *term {
            DrTerm::Observed {
                user,
                item,
                rating,
                imputed,
                weight,
                reg_weight,
            } => {
                let s = m.raw_score(user, item);
                let e = (s - rating).powi(2);
                let e_hat = (s - imputed).powi(2);
                (
                    user,
                    item,
                    weight * (e - e_hat),
                    2.0 * weight * (imputed - rating),
                    reg_weight,
                )
            }
            DrTerm::Pair {
                user,
                item,
                imputed,
                weight,
                reg_weight,
            } => {
                let s = m.raw_score(user, item);
                let diff = s - imputed;
                (user, item, weight * diff * diff, 2.0 * weight * diff, reg_weight)
            }
        };
        let reg = reg_weight * l2;
        loss += value + reg * reg_norm(m, u, i);
        if let Some(g) = grad.as_deref_mut() {
            g.add_example(m, u, i, dscore, reg);
        }
    }
    loss
}
