use crate::data::DatasetMeta;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Anything that assigns a ranking score to a (user, item) pair.
pub trait Scorer {
    fn num_users(&self) -> usize;
    fn num_items(&self) -> usize;
    fn score(&self, user: usize, item: usize) -> f64;
}

/// Biased matrix factorization:
/// `global + b_u + b_i + <p_u, q_i>`, clamped to the rating range on prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct MfModel {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_bias: f64,
    pub rating_min: f64,
    pub rating_max: f64,
}

impl MfModel {
    pub fn zeros(num_users: usize, num_items: usize, dim: usize, rating_min: f64, rating_max: f64) -> Self {
        Self {
            num_users,
            num_items,
            dim,
            user_factors: vec![0.0; num_users * dim],
            item_factors: vec![0.0; num_items * dim],
            user_bias: vec![0.0; num_users],
            item_bias: vec![0.0; num_items],
            global_bias: 0.0,
            rating_min,
            rating_max,
        }
    }

    /// Factors ~ U(-0.01, 0.01), biases zero, global bias = `global_bias`.
    pub fn initialized(meta: &DatasetMeta, dim: usize, global_bias: f64, rng: &mut SeededRng) -> Self {
        let mut m = Self::zeros(meta.num_users, meta.num_items, dim, meta.rating_min, meta.rating_max);
        for x in m.user_factors.iter_mut().chain(m.item_factors.iter_mut()) {
            *x = rng.uniform_range(-0.01, 0.01);
        }
        m.global_bias = global_bias;
        m
    }

    #[inline]
    pub fn user_vec(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    #[inline]
    pub fn item_vec(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    /// Unclamped score. Training losses are defined on this value.
    #[inline]
    pub fn raw_score(&self, u: usize, i: usize) -> f64 {
        let dot: f64 = self.user_vec(u).iter().zip(self.item_vec(i)).map(|(a, b)| a * b).sum();
        self.global_bias + self.user_bias[u] + self.item_bias[i] + dot
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.rating_min, self.rating_max)
    }

    pub fn predict(&self, u: usize, i: usize) -> Result<f64> {
        self.check(u, i)?;
        Ok(self.clamp(self.raw_score(u, i)))
    }

    pub(crate) fn check(&self, u: usize, i: usize) -> Result<()> {
        if u >= self.num_users {
            return Err(Error::OutOfRange(format!("user {u} >= {}", self.num_users)));
        }
        if i >= self.num_items {
            return Err(Error::OutOfRange(format!("item {i} >= {}", self.num_items)));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.global_bias.is_finite()
            && self
                .user_factors
                .iter()
                .chain(&self.item_factors)
                .chain(&self.user_bias)
                .chain(&self.item_bias)
                .all(|x| x.is_finite())
    }

    pub fn num_params(&self) -> usize {
        self.user_factors.len() + self.item_factors.len() + self.num_users + self.num_items + 1
    }

    /// All parameters in a fixed order: user factors, item factors, user
    /// biases, item biases, global bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.user_factors);
        v.extend_from_slice(&self.item_factors);
        v.extend_from_slice(&self.user_bias);
        v.extend_from_slice(&self.item_bias);
        v.push(self.global_bias);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut rest = flat;
        for block in [
            &mut self.user_factors,
            &mut self.item_factors,
            &mut self.user_bias,
            &mut self.item_bias,
        ] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        self.global_bias = rest[0];
    }
}

impl Scorer for MfModel {
    fn num_users(&self) -> usize {
        self.num_users
    }

    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score(&self, user: usize, item: usize) -> f64 {
        self.raw_score(user, item)
    }
}

/// Top-`k` candidates by descending score; ties go to the smaller item index.
pub fn recommend_topk<S: Scorer + ?Sized>(
    model: &S,
    user: usize,
    k: usize,
    candidates: &[usize],
) -> Result<Vec<usize>> {
    if user >= model.num_users() {
        return Err(Error::OutOfRange(format!("user {user} >= {}", model.num_users())));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate items".into()));
    }
    if let Some(&i) = candidates.iter().find(|&&i| i >= model.num_items()) {
        return Err(Error::OutOfRange(format!("item {i} >= {}", model.num_items())));
    }
    let mut scored: Vec<(f64, usize)> = candidates.iter().map(|&i| (model.score(user, i), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}
