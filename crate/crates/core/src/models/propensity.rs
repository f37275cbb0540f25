use std::fmt;
use std::str::FromStr;

use crate::data::{DatasetMeta, Interaction};
use crate::error::{Error, Result};

use super::train::HyperParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropensityMethod {
    /// `max(floor, (count_i / max_j count_j)^power)`, shared by all users.
    ItemPopularity,
    /// `P(o=1 | r)` by Bayes' rule with `P(r)` from the randomized sample.
    NaiveBayes,
}

impl PropensityMethod {
    pub fn tag(self) -> &'static str {
        match self {
            PropensityMethod::ItemPopularity => "item-popularity",
            PropensityMethod::NaiveBayes => "naive-bayes",
        }
    }
}

impl fmt::Display for PropensityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PropensityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "item-popularity" => Ok(PropensityMethod::ItemPopularity),
            "naive-bayes" => Ok(PropensityMethod::NaiveBayes),
            other => Err(Error::InvalidArgument(format!("unknown propensity method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Table {
    PerItem(Vec<f64>),
    ByRating {
        rating_min: f64,
        values: Vec<f64>,
        /// Rating distribution of the randomized sample, same indexing.
        prior: Vec<f64>,
    },
}

/// Estimated observation propensities, clipped to `[floor, 1]`.
///
/// Both estimators are relative: the most exposed item (or rating level)
/// gets 1 before clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct Propensities {
    pub method: PropensityMethod,
    pub floor: f64,
    table: Table,
}

impl Propensities {
    /// Every propensity equal to one.
    pub fn ones(num_items: usize) -> Self {
        Self {
            method: PropensityMethod::ItemPopularity,
            floor: 1.0,
            table: Table::PerItem(vec![1.0; num_items]),
        }
    }

    pub fn from_item_values(values: Vec<f64>, floor: f64) -> Result<Self> {
        if values.iter().any(|&p| !(p >= floor && p <= 1.0)) {
            return Err(Error::InvalidArgument(format!("propensities must lie in [{floor}, 1]")));
        }
        Ok(Self {
            method: PropensityMethod::ItemPopularity,
            floor,
            table: Table::PerItem(values),
        })
    }

    pub fn get(&self, _user: usize, item: usize, rating: f64) -> f64 {
        match &self.table {
            Table::PerItem(v) => v[item],
            Table::ByRating { rating_min, values, .. } => {
                let k = ((rating - rating_min).round().max(0.0) as usize).min(values.len() - 1);
                values[k]
            }
        }
    }

    pub fn per_item(&self) -> Option<&[f64]> {
        match &self.table {
            Table::PerItem(v) => Some(v),
            Table::ByRating { .. } => None,
        }
    }

    /// Average propensity over all (user, item) pairs.
    pub fn mean_over_pairs(&self) -> f64 {
        match &self.table {
            Table::PerItem(v) => v.iter().sum::<f64>() / v.len() as f64,
            Table::ByRating { values, prior, .. } => values.iter().zip(prior).map(|(p, w)| p * w).sum(),
        }
    }

    /// Values outside `[floor, 1]` cannot be produced by the estimators.
    pub(crate) fn check(&self, num_items: usize) -> Result<()> {
        let values = match &self.table {
            Table::PerItem(v) => {
                if v.len() < num_items {
                    return Err(Error::InvalidArgument(format!(
                        "propensities cover {} items, dataset has {num_items}",
                        v.len()
                    )));
                }
                v
            }
            Table::ByRating { values, .. } => values,
        };
        match values.iter().find(|&&p| !(p >= self.floor && p <= 1.0)) {
            Some(p) => Err(Error::InvalidArgument(format!(
                "propensity {p} outside [{}, 1]",
                self.floor
            ))),
            None => Ok(()),
        }
    }
}

pub fn estimate_propensities(
    d_t: &[Interaction],
    d_u: &[Interaction],
    meta: &DatasetMeta,
    method: PropensityMethod,
    hp: &HyperParams,
) -> Result<Propensities> {
    if d_t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let floor = hp.propensity_floor;
    let table = match method {
        PropensityMethod::ItemPopularity => {
            let mut counts = vec![0usize; meta.num_items];
            for x in d_t {
                counts[x.item] += 1;
            }
            let max = *counts.iter().max().unwrap() as f64;
            Table::PerItem(
                counts
                    .iter()
                    .map(|&c| (c as f64 / max).powf(hp.propensity_power).clamp(floor, 1.0))
                    .collect(),
            )
        }
        PropensityMethod::NaiveBayes => {
            if d_u.is_empty() {
                return Err(Error::RequiresRandomized("naive-bayes propensity estimation"));
            }
            let levels = meta.rating_levels();
            let histogram = |rows: &[Interaction]| -> Vec<f64> {
                // add-one smoothing keeps unseen levels finite
                let mut h = vec![1.0; levels.len()];
                for x in rows {
                    let k = ((x.rating - meta.rating_min).round().max(0.0) as usize).min(levels.len() - 1);
                    h[k] += 1.0;
                }
                let total: f64 = h.iter().sum();
                h.iter().map(|c| c / total).collect()
            };
            let given_observed = histogram(d_t);
            let prior = histogram(d_u);
            let p_obs = d_t.len() as f64 / meta.num_pairs() as f64;
            let raw: Vec<f64> = given_observed
                .iter()
                .zip(&prior)
                .map(|(po, pr)| po * p_obs / pr)
                .collect();
            let max = raw.iter().cloned().fold(f64::MIN, f64::max);
            Table::ByRating {
                rating_min: meta.rating_min,
                values: raw.iter().map(|p| (p / max).clamp(floor, 1.0)).collect(),
                prior,
            }
        }
    };
    Ok(Propensities { method, floor, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeedbackKind, Source};

    fn meta(items: usize) -> DatasetMeta {
        DatasetMeta {
            name: "p".into(),
            num_users: 200,
            num_items: items,
            kind: FeedbackKind::Implicit,
            rating_min: 0.0,
            rating_max: 1.0,
        }
    }

    fn rows(counts: &[usize]) -> Vec<Interaction> {
        let mut out = Vec::new();
        for (item, &c) in counts.iter().enumerate() {
            for u in 0..c {
                out.push(Interaction::new(u, item, 1.0, Source::BiasedLog));
            }
        }
        out
    }

    fn hp(floor: f64, power: f64) -> HyperParams {
        HyperParams {
            propensity_floor: floor,
            propensity_power: power,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_popularity_gives_ones() {
        let p = estimate_propensities(
            &rows(&[4, 4, 4]),
            &[],
            &meta(3),
            PropensityMethod::ItemPopularity,
            &hp(0.1, 1.0),
        )
        .unwrap();
        assert_eq!(p.per_item().unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn ratio_by_hand() {
        let p = estimate_propensities(
            &rows(&[10, 5]),
            &[],
            &meta(2),
            PropensityMethod::ItemPopularity,
            &hp(0.1, 1.0),
        )
        .unwrap();
        assert_eq!(p.per_item().unwrap(), &[1.0, 0.5]);
        assert_eq!(p.get(7, 1, 0.0), 0.5);
    }

    #[test]
    fn floor_binds() {
        let p = estimate_propensities(
            &rows(&[100, 1]),
            &[],
            &meta(2),
            PropensityMethod::ItemPopularity,
            &hp(0.1, 1.0),
        )
        .unwrap();
        assert_eq!(p.per_item().unwrap(), &[1.0, 0.1]);
        let unseen = estimate_propensities(
            &rows(&[3, 0]),
            &[],
            &meta(2),
            PropensityMethod::ItemPopularity,
            &hp(0.2, 1.0),
        )
        .unwrap();
        assert_eq!(unseen.per_item().unwrap(), &[1.0, 0.2]);
    }

    #[test]
    fn power_sharpens() {
        let p = estimate_propensities(
            &rows(&[10, 5]),
            &[],
            &meta(2),
            PropensityMethod::ItemPopularity,
            &hp(0.01, 2.0),
        )
        .unwrap();
        assert_eq!(p.per_item().unwrap(), &[1.0, 0.25]);
    }

    #[test]
    fn naive_bayes_needs_randomized_rows() {
        let err =
            estimate_propensities(&rows(&[3]), &[], &meta(1), PropensityMethod::NaiveBayes, &hp(0.1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::RequiresRandomized(_)));
    }

    #[test]
    fn naive_bayes_favours_over_represented_ratings() {
        // biased log: 90% positives; uniform sample: 10% positives
        let mut d_t = Vec::new();
        for u in 0..100 {
            d_t.push(Interaction::new(
                u,
                0,
                if u < 90 { 1.0 } else { 0.0 },
                Source::BiasedLog,
            ));
        }
        let mut d_u = Vec::new();
        for u in 0..100 {
            d_u.push(Interaction::new(
                u,
                1,
                if u < 10 { 1.0 } else { 0.0 },
                Source::Randomized,
            ));
        }
        let p = estimate_propensities(&d_t, &d_u, &meta(2), PropensityMethod::NaiveBayes, &hp(0.01, 1.0)).unwrap();
        assert_eq!(p.get(0, 0, 1.0), 1.0);
        let neg = p.get(0, 0, 0.0);
        // (11/102 / (91/102)) / ((91/102) / (11/102)) by add-one smoothing
        let expected = (11.0 / 91.0) / (91.0 / 11.0);
        assert!((neg - expected).abs() < 1e-12, "{neg} vs {expected}");
        assert!(p.mean_over_pairs() > 0.0 && p.mean_over_pairs() <= 1.0);
    }
}
