//! Synthetic implicit-feedback logs with controllable selection, exposure
//! and position bias.
//!
//! Users and items get Gaussian latent factors; the purchase probability of
//! a pair is `sigmoid(PREFERENCE_SCALE * <u, v> / sqrt(d))`. The biased
//! logging policy draws a user uniformly, ranks a slate of `slots` items by
//! popularity-weighted sampling without replacement (Zipf weights
//! `(rank + 1)^-popularity_skew` over item index), and each slot `s` is seen
//! with probability `position_decay^s`. Only seen items are logged, as a
//! purchase draw (1) or a non-purchase (0). The randomized policy draws the
//! user and the item uniformly.
//!
//! Each (user, item) pair is logged at most once per policy; repeat
//! exposures of an already logged pair are dropped.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::{Dataset, FeedbackKind, Interaction, Source};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Spread of the latent preference logits.
pub const PREFERENCE_SCALE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub name: String,
    pub num_users: usize,
    pub num_items: usize,
    pub latent_dim: usize,
    /// Visible shop positions per impression.
    pub slots: usize,
    /// Per-slot exposure multiplier in (0, 1].
    pub position_decay: f64,
    /// Zipf exponent of the logging policy's item popularity.
    pub popularity_skew: f64,
    pub biased_impressions: usize,
    /// Zero produces no randomized log (a dataset that cannot support DR or
    /// the meta-weighted trainer).
    pub randomized_impressions: usize,
    /// Probability of flipping the purchase outcome, in [0, 0.5).
    pub purchase_noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Implicit log with ~47.6k biased rows and no randomized log.
    pub fn set_a() -> Self {
        Self {
            name: "set-a".into(),
            num_users: 8_000,
            num_items: 30,
            latent_dim: 8,
            slots: 6,
            position_decay: 0.8,
            popularity_skew: 1.0,
            biased_impressions: 47_600,
            randomized_impressions: 0,
            purchase_noise: 0.05,
            seed: 1,
        }
    }

    /// ~100k biased and ~218k randomized rows.
    pub fn set_b() -> Self {
        Self {
            name: "set-b".into(),
            num_users: 20_000,
            num_items: 40,
            biased_impressions: 100_000,
            randomized_impressions: 218_000,
            seed: 2,
            ..Self::set_a()
        }
    }

    /// ~980k biased and ~1.2M randomized rows.
    pub fn set_c() -> Self {
        Self {
            name: "set-c".into(),
            num_users: 120_000,
            num_items: 50,
            biased_impressions: 980_000,
            randomized_impressions: 1_200_000,
            seed: 3,
            ..Self::set_a()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "set-a" => Some(Self::set_a()),
            "set-b" => Some(Self::set_b()),
            "set-c" => Some(Self::set_c()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(format!("synthetic config: {msg}")));
        if self.num_users == 0 || self.num_items == 0 || self.latent_dim == 0 || self.slots == 0 {
            return fail("num_users, num_items, latent_dim and slots must be >= 1".into());
        }
        if self.biased_impressions == 0 {
            return fail("biased_impressions must be >= 1".into());
        }
        if self.slots > self.num_items {
            return fail(format!("slots {} exceed num_items {}", self.slots, self.num_items));
        }
        if !(self.position_decay > 0.0 && self.position_decay <= 1.0) {
            return fail(format!("position_decay {} not in (0, 1]", self.position_decay));
        }
        if !(self.popularity_skew >= 0.0 && self.popularity_skew.is_finite()) {
            return fail(format!("popularity_skew {} must be >= 0", self.popularity_skew));
        }
        if !(0.0..0.5).contains(&self.purchase_noise) {
            return fail(format!("purchase_noise {} not in [0, 0.5)", self.purchase_noise));
        }
        let pairs = self.num_users * self.num_items;
        if self.biased_impressions > pairs || self.randomized_impressions > pairs {
            return fail(format!("requested more rows than the {pairs} distinct pairs"));
        }
        Ok(())
    }
}

/// Purchase probability for every (user, item) pair, row-major by user.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub num_users: usize,
    pub num_items: usize,
    pub probabilities: Vec<f64>,
}

impl GroundTruth {
    pub fn probability(&self, user: usize, item: usize) -> f64 {
        self.probabilities[user * self.num_items + item]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "user,item,probability").map_err(io)?;
        for u in 0..self.num_users {
            for i in 0..self.num_items {
                writeln!(w, "{u},{i},{}", self.probability(u, i)).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticOutput {
    pub biased: Dataset,
    pub randomized: Option<Dataset>,
    pub ground_truth: GroundTruth,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn purchase(rng: &mut SeededRng, p: f64, noise: f64) -> f64 {
    let bought = rng.bernoulli(p);
    let flip = rng.bernoulli(noise);
    if bought != flip {
        1.0
    } else {
        0.0
    }
}

/// Slate of `slots` distinct items drawn proportionally to `log_weights`
/// without replacement (Efraimidis-Spirakis keys), best key first.
fn draw_slate(rng: &mut SeededRng, log_weights: &[f64], slots: usize, keys: &mut Vec<(f64, usize)>) {
    keys.clear();
    for (i, lw) in log_weights.iter().enumerate() {
        // log(u^(1/w)) = ln(u) / w, compared in log space
        let u = 1.0 - rng.uniform();
        keys.push((u.ln() * (-lw).exp(), i));
    }
    keys.select_nth_unstable_by(slots - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keys.truncate(slots);
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticOutput> {
    cfg.validate()?;
    let (nu, ni, d) = (cfg.num_users, cfg.num_items, cfg.latent_dim);
    let mut rng = SeededRng::new(cfg.seed);

    let user_f: Vec<f64> = (0..nu * d).map(|_| rng.normal()).collect();
    let item_f: Vec<f64> = (0..ni * d).map(|_| rng.normal()).collect();
    let norm = PREFERENCE_SCALE / (d as f64).sqrt();
    let mut probabilities = Vec::with_capacity(nu * ni);
    for u in 0..nu {
        let pu = &user_f[u * d..(u + 1) * d];
        for i in 0..ni {
            let qi = &item_f[i * d..(i + 1) * d];
            let dot: f64 = pu.iter().zip(qi).map(|(a, b)| a * b).sum();
            probabilities.push(sigmoid(norm * dot));
        }
    }
    let truth = GroundTruth {
        num_users: nu,
        num_items: ni,
        probabilities,
    };

    let log_weights: Vec<f64> = (0..ni).map(|i| -cfg.popularity_skew * ((i + 1) as f64).ln()).collect();
    let slot_seen: Vec<f64> = (0..cfg.slots).map(|s| cfg.position_decay.powi(s as i32)).collect();

    let mut logged = vec![false; nu * ni];
    let mut biased = Vec::with_capacity(cfg.biased_impressions);
    let mut keys = Vec::with_capacity(ni);
    let max_slates = 50 * cfg.biased_impressions + 10_000;
    let mut slates = 0;
    while biased.len() < cfg.biased_impressions {
        slates += 1;
        if slates > max_slates {
            return Err(Error::InvalidArgument(format!(
                "synthetic config: logging policy reached only {} distinct biased pairs of {} requested",
                biased.len(),
                cfg.biased_impressions
            )));
        }
        let u = rng.below(nu);
        draw_slate(&mut rng, &log_weights, cfg.slots, &mut keys);
        for (slot, &(_, i)) in keys.iter().enumerate() {
            if !rng.bernoulli(slot_seen[slot]) {
                continue;
            }
            let r = purchase(&mut rng, truth.probability(u, i), cfg.purchase_noise);
            let cell = &mut logged[u * ni + i];
            if *cell || biased.len() == cfg.biased_impressions {
                continue;
            }
            *cell = true;
            biased.push(Interaction::new(u, i, r, Source::BiasedLog));
        }
    }

    let randomized = if cfg.randomized_impressions == 0 {
        None
    } else {
        let mut logged = vec![false; nu * ni];
        let mut rows = Vec::with_capacity(cfg.randomized_impressions);
        while rows.len() < cfg.randomized_impressions {
            let u = rng.below(nu);
            let i = rng.below(ni);
            let r = purchase(&mut rng, truth.probability(u, i), cfg.purchase_noise);
            let cell = &mut logged[u * ni + i];
            if *cell {
                continue;
            }
            *cell = true;
            rows.push(Interaction::new(u, i, r, Source::Randomized));
        }
        Some(rows)
    };

    let make = |interactions| Dataset {
        name: cfg.name.clone(),
        num_users: nu,
        num_items: ni,
        kind: FeedbackKind::Implicit,
        rating_min: 0.0,
        rating_max: 1.0,
        interactions,
    };
    Ok(SyntheticOutput {
        biased: make(biased),
        randomized: randomized.map(make),
        ground_truth: truth,
    })
}
