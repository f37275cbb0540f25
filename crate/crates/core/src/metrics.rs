//! RMSE, pooled AUC, NDCG@k, Gini and entropy, plus the top-k
//! recommendation distribution that Gini and entropy are computed over.

use std::collections::BTreeMap;

use crate::data::{DatasetMeta, Interaction};
use crate::error::{Error, Result};
use crate::models::{recommend_topk, MfModel, Scorer};

/// Cutoff shared by NDCG and the recommendation distribution.
pub const DEFAULT_K: usize = 5;

pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("rmse of no pairs"));
    }
    let sse: f64 = pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

/// Rank-sum AUC over one pooled ranking. Tied scores share their average
/// rank, which makes this equal to the fraction of correctly ordered
/// positive/negative pairs with ties counted as 1/2.
pub fn auc(scored: &[(f64, bool)]) -> Result<f64> {
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("auc needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[start]].0 {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&k| scored[k].1).count();
        rank_sum += avg * tied_pos as f64;
        start = end;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

fn dcg(relevances: impl Iterator<Item = f64>, k: usize) -> f64 {
    relevances
        .take(k)
        .enumerate()
        .map(|(pos, rel)| (2f64.powf(rel) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// NDCG@k of relevances listed in model order, against the ideal ordering
/// of `ideal`. Zero when the ideal DCG is zero.
pub fn ndcg_at_k(ranked: &[f64], ideal: &[f64], k: usize) -> f64 {
    let mut best = ideal.to_vec();
    best.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(best.into_iter(), k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(ranked.iter().copied(), k) / idcg
}

/// Gini index of a non-negative popularity vector (sorted internally).
pub fn gini(popularity: &[f64]) -> Result<f64> {
    if popularity.is_empty() {
        return Err(Error::UndefinedMetric("gini of an empty vector"));
    }
    if popularity.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::UndefinedMetric("gini needs finite non-negative values"));
    }
    let total: f64 = popularity.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("gini of an all-zero vector"));
    }
    let mut sorted = popularity.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| (2.0 * (k + 1) as f64 - n - 1.0) * x)
        .sum();
    Ok(weighted / (n * total))
}

/// Shannon entropy in nats.
pub fn entropy(probabilities: &[f64]) -> Result<f64> {
    if probabilities.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::UndefinedMetric(
            "entropy needs finite non-negative probabilities",
        ));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::UndefinedMetric("entropy needs probabilities summing to 1"));
    }
    Ok(-probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>())
}

/// Candidate items a user's top-k list is drawn from.
#[derive(Clone, Copy, Debug)]
pub enum Candidates<'a> {
    Shared(&'a [usize]),
    PerUser(&'a BTreeMap<usize, Vec<usize>>),
}

impl<'a> Candidates<'a> {
    fn for_user(&self, user: usize) -> &'a [usize] {
        match *self {
            Candidates::Shared(items) => items,
            Candidates::PerUser(map) => map.get(&user).map(Vec::as_slice).unwrap_or(&[]),
        }
    }
}

/// How often each item appears across users' top-k lists.
#[derive(Clone, Debug, PartialEq)]
pub struct RecDistribution {
    pub counts: Vec<u64>,
    pub k: usize,
    /// Users that had at least `k` candidates and therefore contributed.
    pub users_counted: usize,
}

impl RecDistribution {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn gini(&self) -> Result<f64> {
        let phi: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        gini(&phi)
    }

    pub fn entropy(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::UndefinedMetric(
                "entropy of an empty recommendation distribution",
            ));
        }
        entropy(&self.probabilities())
    }
}

/// Counts item appearances in `recommend_topk(model, u, k, candidates(u))`
/// over `users`. Users with fewer than `k` candidates are skipped.
pub fn rec_distribution<S: Scorer + ?Sized>(
    model: &S,
    users: &[usize],
    candidates: Candidates<'_>,
    k: usize,
) -> Result<RecDistribution> {
    if users.is_empty() {
        return Err(Error::InvalidArgument(
            "rec_distribution needs at least one user".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut counts = vec![0u64; model.num_items()];
    let mut users_counted = 0;
    for &u in users {
        let cand = candidates.for_user(u);
        if cand.len() < k {
            continue;
        }
        for i in recommend_topk(model, u, k, cand)? {
            counts[i] += 1;
        }
        users_counted += 1;
    }
    Ok(RecDistribution {
        counts,
        k,
        users_counted,
    })
}

/// Scores on D_Te plus training time, one row of a results table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValues {
    pub rmse: f64,
    pub auc: f64,
    pub ndcg: f64,
    pub gini: f64,
    pub entropy: f64,
    pub training_time_seconds: f64,
}

/// Test items of each user, in file order.
pub fn items_by_user(rows: &[Interaction]) -> BTreeMap<usize, Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x in rows {
        map.entry(x.user).or_default().push(x.item);
    }
    map
}

/// Mean per-user NDCG@k over users with at least one relevant test item.
/// Relevance is the rating itself (0/1 for implicit data).
pub fn mean_user_ndcg<S: Scorer + ?Sized>(model: &S, test: &[Interaction], k: usize) -> Result<f64> {
    let mut by_user: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for x in test {
        by_user.entry(x.user).or_default().push((x.item, x.rating));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (u, mut rows) in by_user {
        if !rows.iter().any(|r| r.1 > 0.0) {
            continue;
        }
        let ideal: Vec<f64> = rows.iter().map(|r| r.1).collect();
        rows.sort_by(|a, b| model.score(u, b.0).total_cmp(&model.score(u, a.0)).then(a.0.cmp(&b.0)));
        let ranked: Vec<f64> = rows.iter().map(|r| r.1).collect();
        total += ndcg_at_k(&ranked, &ideal, k);
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("ndcg: no user has a relevant test item"));
    }
    Ok(total / n as f64)
}

/// Validation/test AUC of a model on `rows`, labels from the dataset threshold.
pub fn model_auc<S: Scorer + ?Sized>(model: &S, rows: &[Interaction], meta: &DatasetMeta) -> Result<f64> {
    let scored: Vec<(f64, bool)> = rows
        .iter()
        .map(|x| (model.score(x.user, x.item), meta.is_positive(x.rating)))
        .collect();
    auc(&scored)
}

/// All five quality metrics of `model` on `test`. `training_time_seconds`
/// is left at zero for the caller to fill.
///
/// Gini and entropy come from each test user's top-k over their own test
/// items; if no user has `k` of them, over all items.
pub fn evaluate(model: &MfModel, test: &[Interaction], meta: &DatasetMeta, k: usize) -> Result<MetricValues> {
    if test.is_empty() {
        return Err(Error::UndefinedMetric("evaluation on an empty test set"));
    }
    let pairs: Vec<(f64, f64)> = test
        .iter()
        .map(|x| Ok((model.predict(x.user, x.item)?, x.rating)))
        .collect::<Result<_>>()?;
    let candidates = items_by_user(test);
    let users: Vec<usize> = candidates.keys().copied().collect();
    let mut dist = rec_distribution(model, &users, Candidates::PerUser(&candidates), k)?;
    if dist.users_counted == 0 {
        // too few test items per user (typical of a biased-log holdout):
        // rank the whole catalogue instead
        let all: Vec<usize> = (0..model.num_items).collect();
        dist = rec_distribution(model, &users, Candidates::Shared(&all), k)?;
    }
    Ok(MetricValues {
        rmse: rmse(&pairs)?,
        auc: model_auc(model, test, meta)?,
        ndcg: mean_user_ndcg(model, test, k)?,
        gini: dist.gini()?,
        entropy: dist.entropy()?,
        training_time_seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    /// Every positive/negative pair, ties counting 1/2.
    fn pairwise_auc(scored: &[(f64, bool)]) -> f64 {
        let mut good = 0.0;
        let mut total = 0.0;
        for p in scored.iter().filter(|s| s.1) {
            for n in scored.iter().filter(|s| !s.1) {
                total += 1.0;
                if p.0 > n.0 {
                    good += 1.0;
                } else if p.0 == n.0 {
                    good += 0.5;
                }
            }
        }
        good / total
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[(1.0, 1.0), (3.0, 3.0)]).unwrap(), 0.0);
        assert!(close(rmse(&[(1.0, 2.0), (3.0, 5.0)]).unwrap(), (2.5f64).sqrt()));
        assert!(close(rmse(&[(1.25, 1.0), (3.25, 3.0), (0.25, 0.0)]).unwrap(), 0.25));
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn auc_cases() {
        let sep = [(0.9, true), (0.8, true), (0.1, false), (0.2, false)];
        assert_eq!(auc(&sep).unwrap(), 1.0);
        let flat = [(0.5, true), (0.5, false), (0.5, true)];
        assert_eq!(auc(&flat).unwrap(), 0.5);
        let mixed = [(0.9, true), (0.8, false), (0.7, true), (0.6, false)];
        assert_eq!(pairwise_auc(&mixed), 0.75);
        assert!(close(auc(&mixed).unwrap(), 0.75));
        assert!(auc(&[(0.1, true), (0.2, true)]).is_err());
        assert!(auc(&[(0.1, false)]).is_err());
    }

    #[test]
    fn ndcg_cases() {
        assert!(close(ndcg_at_k(&[3.0, 2.0, 0.0], &[0.0, 3.0, 2.0], 3), 1.0));
        assert!(close(ndcg_at_k(&[0.0, 1.0], &[0.0, 1.0], 2), 1.0 / 3f64.log2()));
        assert!(close(ndcg_at_k(&[0.0, 1.0], &[0.0, 1.0], 2), 0.630_929_753_571_457_4));
        assert_eq!(ndcg_at_k(&[0.0, 0.0], &[0.0, 0.0], 2), 0.0);
    }

    #[test]
    fn gini_cases() {
        assert!(close(gini(&[2.0, 2.0, 2.0]).unwrap(), 0.0));
        assert!(close(gini(&[1.0, 3.0]).unwrap(), 0.25));
        assert!(close(gini(&[3.0, 1.0]).unwrap(), 0.25));
        assert!(close(gini(&[0.0, 0.0, 1.0]).unwrap(), 2.0 / 3.0));
        assert!(gini(&[0.0, 0.0]).is_err());
        assert!(gini(&[]).is_err());
        assert!(gini(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!(close(entropy(&[0.25; 4]).unwrap(), 4f64.ln()));
        let expected = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!(close(entropy(&[0.5, 0.25, 0.25]).unwrap(), expected));
        assert!(close(entropy(&[0.5, 0.25, 0.25]).unwrap(), 1.039_720_770_839_917_9));
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[-0.5, 1.5]).is_err());
    }

    struct Const(usize, usize);

    impl Scorer for Const {
        fn num_users(&self) -> usize {
            self.0
        }
        fn num_items(&self) -> usize {
            self.1
        }
        fn score(&self, _: usize, _: usize) -> f64 {
            1.0
        }
    }

    #[test]
    fn distribution_accounting() {
        let model = Const(1, 3);
        let d = rec_distribution(&model, &[0], Candidates::Shared(&[0, 1, 2]), 2).unwrap();
        assert_eq!(d.counts.iter().filter(|&&c| c > 0).count(), 2);
        assert_eq!(d.total(), 2);
    }

    #[test]
    fn constant_scores_concentrate_on_lowest_indices() {
        let model = Const(10, 5);
        let users: Vec<usize> = (0..10).collect();
        let d = rec_distribution(&model, &users, Candidates::Shared(&[4, 3, 2, 1, 0]), 2).unwrap();
        assert_eq!(d.counts, vec![10, 10, 0, 0, 0]);
        assert_eq!(d.users_counted, 10);
    }

    #[test]
    fn users_with_too_few_candidates_are_skipped() {
        let model = Const(2, 5);
        let mut per = BTreeMap::new();
        per.insert(0, vec![0, 1, 2]);
        per.insert(1, vec![3]);
        let d = rec_distribution(&model, &[0, 1], Candidates::PerUser(&per), 2).unwrap();
        assert_eq!(d.users_counted, 1);
        assert_eq!(d.total(), 2);
        assert!(rec_distribution(&model, &[], Candidates::PerUser(&per), 2).is_err());
    }
}
