//! Interactions, datasets and the biased/randomized split protocol.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeedbackKind {
    /// Integer ratings on a declared scale, e.g. 1..5.
    Explicit,
    /// Purchase / no purchase, stored as 1.0 / 0.0.
    Implicit,
}

impl FeedbackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::Explicit => "explicit",
            FeedbackKind::Implicit => "implicit",
        }
    }
}

impl FromStr for FeedbackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "explicit" => Ok(FeedbackKind::Explicit),
            "implicit" => Ok(FeedbackKind::Implicit),
            other => Err(Error::InvalidArgument(format!("unknown feedback kind `{other}`"))),
        }
    }
}

/// Which logging policy produced an interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    BiasedLog,
    Randomized,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::BiasedLog => "biased-log",
            Source::Randomized => "randomized",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "biased-log" => Ok(Source::BiasedLog),
            "randomized" => Ok(Source::Randomized),
            other => Err(Error::InvalidArgument(format!("unknown source `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub source: Source,
}

impl Interaction {
    pub fn new(user: usize, item: usize, rating: f64, source: Source) -> Self {
        Self {
            user,
            item,
            rating,
            source,
        }
    }
}

/// Everything about a dataset except its interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub num_users: usize,
    pub num_items: usize,
    pub kind: FeedbackKind,
    pub rating_min: f64,
    pub rating_max: f64,
}

impl DatasetMeta {
    /// Ratings at or above this value count as positives for AUC.
    ///
    /// Implicit data: 1. Explicit 1..5 data: 4.
    pub fn positive_threshold(&self) -> f64 {
        match self.kind {
            FeedbackKind::Implicit => 1.0,
            FeedbackKind::Explicit => self.rating_min + 0.75 * (self.rating_max - self.rating_min),
        }
    }

    pub fn is_positive(&self, rating: f64) -> bool {
        rating >= self.positive_threshold()
    }

    /// Distinct rating levels, ascending.
    pub fn rating_levels(&self) -> Vec<f64> {
        match self.kind {
            FeedbackKind::Implicit => vec![0.0, 1.0],
            FeedbackKind::Explicit => {
                let lo = self.rating_min.round() as i64;
                let hi = self.rating_max.round() as i64;
                (lo..=hi).map(|r| r as f64).collect()
            }
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.num_users * self.num_items
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_users: usize,
    pub num_items: usize,
    pub kind: FeedbackKind,
    pub rating_min: f64,
    pub rating_max: f64,
    pub interactions: Vec<Interaction>,
}

/// One broken dataset invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoUsers,
    NoItems,
    NoInteractions,
    UserOutOfRange {
        index: usize,
        user: usize,
    },
    ItemOutOfRange {
        index: usize,
        item: usize,
    },
    RatingOutOfScale {
        index: usize,
        rating: f64,
    },
    DuplicateTriple {
        index: usize,
        user: usize,
        item: usize,
        source: Source,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoUsers => write!(f, "num_users is zero"),
            Violation::NoItems => write!(f, "num_items is zero"),
            Violation::NoInteractions => write!(f, "no interactions"),
            Violation::UserOutOfRange { index, user } => {
                write!(f, "row {index}: user {user} out of range")
            }
            Violation::ItemOutOfRange { index, item } => {
                write!(f, "row {index}: item {item} out of range")
            }
            Violation::RatingOutOfScale { index, rating } => {
                write!(f, "row {index}: rating {rating} outside the declared scale")
            }
            Violation::DuplicateTriple {
                index,
                user,
                item,
                source,
            } => write!(f, "row {index}: duplicate ({user}, {item}, {source})"),
        }
    }
}

impl Dataset {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            name: self.name.clone(),
            num_users: self.num_users,
            num_items: self.num_items,
            kind: self.kind,
            rating_min: self.rating_min,
            rating_max: self.rating_max,
        }
    }

    pub fn from_meta(meta: DatasetMeta, interactions: Vec<Interaction>) -> Self {
        Self {
            name: meta.name,
            num_users: meta.num_users,
            num_items: meta.num_items,
            kind: meta.kind,
            rating_min: meta.rating_min,
            rating_max: meta.rating_max,
            interactions,
        }
    }

    fn rating_in_scale(&self, rating: f64) -> bool {
        match self.kind {
            FeedbackKind::Implicit => rating == 0.0 || rating == 1.0,
            FeedbackKind::Explicit => {
                rating.is_finite() && rating.fract() == 0.0 && rating >= self.rating_min && rating <= self.rating_max
            }
        }
    }

    /// Every invariant violation, in row order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_users == 0 {
            out.push(Violation::NoUsers);
        }
        if self.num_items == 0 {
            out.push(Violation::NoItems);
        }
        if self.interactions.is_empty() {
            out.push(Violation::NoInteractions);
        }
        let mut seen = HashSet::with_capacity(self.interactions.len());
        for (index, x) in self.interactions.iter().enumerate() {
            if x.user >= self.num_users {
                out.push(Violation::UserOutOfRange { index, user: x.user });
            }
            if x.item >= self.num_items {
                out.push(Violation::ItemOutOfRange { index, item: x.item });
            }
            if !self.rating_in_scale(x.rating) {
                out.push(Violation::RatingOutOfScale {
                    index,
                    rating: x.rating,
                });
            }
            if !seen.insert((x.user, x.item, x.source)) {
                out.push(Violation::DuplicateTriple {
                    index,
                    user: x.user,
                    item: x.item,
                    source: x.source,
                });
            }
        }
        out
    }

    pub fn by_source(&self, source: Source) -> Vec<Interaction> {
        self.interactions
            .iter()
            .filter(|x| x.source == source)
            .copied()
            .collect()
    }
}

pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    ds.validate()
}

/// Fractions of the randomized log routed to D_U, D_V and D_Te.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train_aid: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const STANDARD: SplitRatios = SplitRatios {
        train_aid: 0.05,
        validation: 0.05,
        test: 0.90,
    };

    pub fn new(train_aid: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self {
            train_aid,
            validation,
            test,
        };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        let parts = [self.train_aid, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidRatios(format!("{parts:?} must all be positive")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("{parts:?} sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Part sizes for `n` rows: round-half-up on the first two, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let round = |r: f64| ((r * n as f64) + 0.5 + 1e-9).floor() as usize;
        let a = round(self.train_aid).min(n);
        let b = round(self.validation).min(n - a);
        (a, b, n - a - b)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// The three randomized parts: D_U, D_V, D_Te.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedParts {
    pub d_u: Vec<Interaction>,
    pub d_v: Vec<Interaction>,
    pub d_te: Vec<Interaction>,
}

/// Shuffles the randomized log under `seed` and cuts it into D_U / D_V / D_Te.
pub fn split_randomized(randomized: &[Interaction], ratios: SplitRatios, seed: u64) -> Result<RandomizedParts> {
    if randomized.is_empty() {
        return Err(Error::NoRandomizedData);
    }
    ratios.check()?;
    if let Some(x) = randomized.iter().find(|x| x.source != Source::Randomized) {
        return Err(Error::SourceMismatch(format!(
            "randomized split received a {} row ({}, {})",
            x.source, x.user, x.item
        )));
    }
    let mut shuffled = randomized.to_vec();
    SeededRng::new(seed).shuffle(&mut shuffled);
    let (a, b, _) = ratios.sizes(shuffled.len());
    let d_te = shuffled.split_off(a + b);
    let d_v = shuffled.split_off(a);
    Ok(RandomizedParts {
        d_u: shuffled,
        d_v,
        d_te,
    })
}

/// The four-way partition that drives training and evaluation.
///
/// `holdout` records where D_V and D_Te came from. It is `Randomized` under
/// the standard protocol and `BiasedLog` only for datasets that have no
/// randomized log at all (see [`DataSplit::biased_holdout`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub meta: DatasetMeta,
    pub d_t: Vec<Interaction>,
    pub d_u: Vec<Interaction>,
    pub d_v: Vec<Interaction>,
    pub d_te: Vec<Interaction>,
    pub holdout: Source,
}

pub fn attach_biased(meta: DatasetMeta, d_t: Vec<Interaction>, parts: RandomizedParts) -> Result<DataSplit> {
    if d_t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(x) = d_t.iter().find(|x| x.source != Source::BiasedLog) {
        return Err(Error::SourceMismatch(format!(
            "D_T contains a {} row ({}, {})",
            x.source, x.user, x.item
        )));
    }
    let RandomizedParts { d_u, d_v, d_te } = parts;
    for (name, part) in [("D_U", &d_u), ("D_V", &d_v), ("D_Te", &d_te)] {
        if let Some(x) = part.iter().find(|x| x.source != Source::Randomized) {
            return Err(Error::SourceMismatch(format!(
                "{name} contains a {} row ({}, {})",
                x.source, x.user, x.item
            )));
        }
    }
    Ok(DataSplit {
        meta,
        d_t,
        d_u,
        d_v,
        d_te,
        holdout: Source::Randomized,
    })
}

impl DataSplit {
    /// Builds the standard split from a biased and a randomized dataset.
    pub fn standard(biased: &Dataset, randomized: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Self> {
        if biased.num_users != randomized.num_users || biased.num_items != randomized.num_items {
            return Err(Error::InvalidArgument(format!(
                "biased ({}x{}) and randomized ({}x{}) datasets disagree on shape",
                biased.num_users, biased.num_items, randomized.num_users, randomized.num_items
            )));
        }
        let parts = split_randomized(&randomized.interactions, ratios, seed)?;
        attach_biased(biased.meta(), biased.interactions.clone(), parts)
    }

    /// Split for datasets without any randomized log.
    ///
    /// D_U stays empty, so DR and the meta-weighted trainer refuse to run.
    /// D_V and D_Te are carved out of the shuffled biased log with the given
    /// fractions (round-half-up); the rest is D_T.
    pub fn biased_holdout(biased: &Dataset, validation: f64, test: f64, seed: u64) -> Result<Self> {
        if biased.interactions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let ok = |r: f64| r.is_finite() && r > 0.0;
        if !(ok(validation) && ok(test) && validation + test < 1.0) {
            return Err(Error::InvalidRatios(format!(
                "biased holdout fractions ({validation}, {test}) must be positive and sum below 1"
            )));
        }
        let mut rows = biased.interactions.clone();
        if let Some(x) = rows.iter().find(|x| x.source != Source::BiasedLog) {
            return Err(Error::SourceMismatch(format!(
                "biased holdout received a {} row ({}, {})",
                x.source, x.user, x.item
            )));
        }
        SeededRng::new(seed).shuffle(&mut rows);
        let n = rows.len();
        let round = |r: f64| ((r * n as f64) + 0.5 + 1e-9).floor() as usize;
        let n_v = round(validation).min(n);
        let n_te = round(test).min(n - n_v);
        let d_t = rows.split_off(n_v + n_te);
        let d_te = rows.split_off(n_v);
        if d_t.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(DataSplit {
            meta: biased.meta(),
            d_t,
            d_u: Vec::new(),
            d_v: rows,
            d_te,
            holdout: Source::BiasedLog,
        })
    }

    pub fn has_randomized(&self) -> bool {
        !self.d_u.is_empty()
    }
}
