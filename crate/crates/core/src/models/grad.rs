//! Sparse-touch gradient buffer shaped like an [`MfModel`].

use super::mf::MfModel;

/// Dense per-block accumulators plus the list of rows touched since the last
/// [`Gradient::clear`], so clearing and applying cost O(touched).
#[derive(Clone, Debug)]
pub struct Gradient {
    dim: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_bias: f64,
    users: Vec<usize>,
    items: Vec<usize>,
    user_seen: Vec<bool>,
    item_seen: Vec<bool>,
}

impl Gradient {
    pub fn for_model(m: &MfModel) -> Self {
        Self {
            dim: m.dim,
            user_factors: vec![0.0; m.user_factors.len()],
            item_factors: vec![0.0; m.item_factors.len()],
            user_bias: vec![0.0; m.num_users],
            item_bias: vec![0.0; m.num_items],
            global_bias: 0.0,
            users: Vec::new(),
            items: Vec::new(),
            user_seen: vec![false; m.num_users],
            item_seen: vec![false; m.num_items],
        }
    }

    pub fn clear(&mut self) {
        let d = self.dim;
        for &u in &self.users {
            self.user_factors[u * d..(u + 1) * d].fill(0.0);
            self.user_bias[u] = 0.0;
            self.user_seen[u] = false;
        }
        for &i in &self.items {
            self.item_factors[i * d..(i + 1) * d].fill(0.0);
            self.item_bias[i] = 0.0;
            self.item_seen[i] = false;
        }
        self.users.clear();
        self.items.clear();
        self.global_bias = 0.0;
    }

    #[inline]
    fn touch(&mut self, u: usize, i: usize) {
        if !self.user_seen[u] {
            self.user_seen[u] = true;
            self.users.push(u);
        }
        if !self.item_seen[i] {
            self.item_seen[i] = true;
            self.items.push(i);
        }
    }

    /// Adds `dscore * grad(score_ui)` evaluated at factors `pu`, `qi`.
    #[inline]
    pub fn add_score_grad(&mut self, u: usize, i: usize, dscore: f64, pu: &[f64], qi: &[f64]) {
        self.touch(u, i);
        let d = self.dim;
        for k in 0..d {
            self.user_factors[u * d + k] += dscore * qi[k];
            self.item_factors[i * d + k] += dscore * pu[k];
        }
        self.user_bias[u] += dscore;
        self.item_bias[i] += dscore;
        self.global_bias += dscore;
    }

    /// Adds `dscore * grad(score_ui)` plus the gradient of
    /// `reg * (|p_u|^2 + |q_i|^2 + b_u^2 + b_i^2)`, all at `m`.
    #[inline]
    pub fn add_example(&mut self, m: &MfModel, u: usize, i: usize, dscore: f64, reg: f64) {
        self.touch(u, i);
        let d = self.dim;
        let pu = m.user_vec(u);
        let qi = m.item_vec(i);
        for k in 0..d {
            self.user_factors[u * d + k] += dscore * qi[k] + 2.0 * reg * pu[k];
            self.item_factors[i * d + k] += dscore * pu[k] + 2.0 * reg * qi[k];
        }
        self.user_bias[u] += dscore + 2.0 * reg * m.user_bias[u];
        self.item_bias[i] += dscore + 2.0 * reg * m.item_bias[i];
        self.global_bias += dscore;
    }

    /// `<self, grad(score_ui)>` with the score gradient taken at `m`.
    #[inline]
    pub fn dot_score_grad(&self, m: &MfModel, u: usize, i: usize) -> f64 {
        let d = self.dim;
        let gu = &self.user_factors[u * d..(u + 1) * d];
        let gi = &self.item_factors[i * d..(i + 1) * d];
        let mut acc = self.user_bias[u] + self.item_bias[i] + self.global_bias;
        for (k, (a, b)) in m.user_vec(u).iter().zip(m.item_vec(i)).enumerate() {
            acc += gu[k] * b + gi[k] * a;
        }
        acc
    }

    /// `m <- m - lr * self` over touched rows.
    pub fn apply(&self, m: &mut MfModel, lr: f64) {
        let d = self.dim;
        for &u in &self.users {
            for k in u * d..(u + 1) * d {
                m.user_factors[k] -= lr * self.user_factors[k];
            }
            m.user_bias[u] -= lr * self.user_bias[u];
        }
        for &i in &self.items {
            for k in i * d..(i + 1) * d {
                m.item_factors[k] -= lr * self.item_factors[k];
            }
            m.item_bias[i] -= lr * self.item_bias[i];
        }
        m.global_bias -= lr * self.global_bias;
    }

    /// User factor row after a step of size `lr`: `p_u - lr * g_u`.
    pub fn stepped_user(&self, m: &MfModel, u: usize, lr: f64, out: &mut [f64]) {
        let d = self.dim;
        let rows = m.user_factors[u * d..(u + 1) * d]
            .iter()
            .zip(&self.user_factors[u * d..(u + 1) * d]);
        for (o, (p, g)) in out[..d].iter_mut().zip(rows) {
            *o = p - lr * g;
        }
    }

    pub fn stepped_item(&self, m: &MfModel, i: usize, lr: f64, out: &mut [f64]) {
        let d = self.dim;
        let rows = m.item_factors[i * d..(i + 1) * d]
            .iter()
            .zip(&self.item_factors[i * d..(i + 1) * d]);
        for (o, (p, g)) in out[..d].iter_mut().zip(rows) {
            *o = p - lr * g;
        }
    }

    /// Raw score at `m - lr * self`.
    pub fn stepped_score(&self, m: &MfModel, u: usize, i: usize, lr: f64) -> f64 {
        let d = self.dim;
        let mut acc = (m.global_bias - lr * self.global_bias)
            + (m.user_bias[u] - lr * self.user_bias[u])
            + (m.item_bias[i] - lr * self.item_bias[i]);
        for k in 0..d {
            let p = m.user_factors[u * d + k] - lr * self.user_factors[u * d + k];
            let q = m.item_factors[i * d + k] - lr * self.item_factors[i * d + k];
            acc += p * q;
        }
        acc
    }

    /// Dense copy in [`MfModel::to_flat`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.user_factors);
        v.extend_from_slice(&self.item_factors);
        v.extend_from_slice(&self.user_bias);
        v.extend_from_slice(&self.item_bias);
        v.push(self.global_bias);
        v
    }
}
