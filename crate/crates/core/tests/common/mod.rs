#![allow(dead_code)]

use debias::data::{DataSplit, Dataset, DatasetMeta, FeedbackKind, Interaction, Source, SplitRatios};
use debias::ingest::{generate_synthetic, SyntheticConfig};
use debias::models::*;
use debias::rng::SeededRng;

pub fn explicit_meta(users: usize, items: usize) -> DatasetMeta {
    DatasetMeta {
        name: "toy".into(),
        num_users: users,
        num_items: items,
        kind: FeedbackKind::Explicit,
        rating_min: 1.0,
        rating_max: 5.0,
    }
}

/// Model with every parameter drawn from `U(-scale, scale)` and a mid-range global bias.
pub fn random_model(meta: &DatasetMeta, dim: usize, scale: f64, rng: &mut SeededRng) -> MfModel {
    let mut m = MfModel::zeros(meta.num_users, meta.num_items, dim, meta.rating_min, meta.rating_max);
    let mut flat = m.to_flat();
    for x in flat.iter_mut() {
        *x = rng.uniform_range(-scale, scale);
    }
    *flat.last_mut().unwrap() = 3.0 + rng.uniform_range(-0.5, 0.5);
    m.set_flat(&flat);
    m
}

/// `|a - b| / max(|a|, |b|)` over whole vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` around `x`.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + step;
            let up = f(&probe);
            probe[k] = x[k] - step;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Small implicit synthetic set with a randomized log, split under `seed`.
pub fn small_split(seed: u64) -> DataSplit {
    let cfg = SyntheticConfig {
        name: "small".into(),
        num_users: 200,
        num_items: 12,
        latent_dim: 4,
        slots: 3,
        position_decay: 0.8,
        popularity_skew: 1.0,
        biased_impressions: 1_200,
        randomized_impressions: 1_000,
        purchase_noise: 0.05,
        seed: 5,
    };
    let out = generate_synthetic(&cfg).unwrap();
    let ratios = SplitRatios::new(0.2, 0.2, 0.6).unwrap();
    DataSplit::standard(&out.biased, out.randomized.as_ref().unwrap(), ratios, seed).unwrap()
}

pub fn quick_hp() -> HyperParams {
    HyperParams {
        latent_dim: 4,
        max_epochs: 4,
        patience: 2,
        all_pairs_sample_rate: 0.2,
        ..Default::default()
    }
}

pub fn randomized_rows(n: usize) -> Vec<Interaction> {
    (0..n)
        .map(|k| Interaction::new(k % 97, k / 97, (k % 2) as f64, Source::Randomized))
        .collect()
}

pub fn dataset(meta: &DatasetMeta, interactions: Vec<Interaction>) -> Dataset {
    Dataset::from_meta(meta.clone(), interactions)
}

fn random_rows(rng: &mut SeededRng, n: usize) -> Vec<(usize, usize, f64)> {
    (0..n)
        .map(|_| (rng.below(4), rng.below(4), (1 + rng.below(5)) as f64))
        .collect()
}

pub const STEP: f64 = 1e-5;
pub const POINTS: u64 = 10;

/// Worst relative gradient error of the weighted squared objective.
pub fn weighted_squared_error() -> f64 {
    let mut worst: f64 = 0.0;
    let meta = explicit_meta(4, 4);
    for point in 0..POINTS {
        let mut rng = SeededRng::new(100 + point);
        let m = random_model(&meta, 3, 0.5, &mut rng);
        let batch: Vec<WeightedTarget> = random_rows(&mut rng, 6)
            .into_iter()
            .map(|(u, i, r)| WeightedTarget {
                user: u,
                item: i,
                target: r,
                weight: rng.uniform_range(0.1, 1.0),
                reg_weight: rng.uniform_range(0.0, 0.5),
            })
            .collect();
        let mut g = Gradient::for_model(&m);
        weighted_squared(&m, &batch, 0.05, Some(&mut g));
        let numeric = numeric_gradient(&m.to_flat(), STEP, |x| {
            let mut probe = m.clone();
            probe.set_flat(x);
            weighted_squared(&probe, &batch, 0.05, None)
        });
        let err = relative_error(&g.to_flat(), &numeric);
        worst = worst.max(err);
    }
    worst
}

/// Worst relative gradient error of the DR prediction objective.
pub fn dr_prediction_error() -> f64 {
    let mut worst: f64 = 0.0;
    let meta = explicit_meta(4, 4);
    for point in 0..POINTS {
        let mut rng = SeededRng::new(200 + point);
        let m = random_model(&meta, 3, 0.5, &mut rng);
        let mut batch: Vec<DrTerm> = random_rows(&mut rng, 5)
            .into_iter()
            .map(|(u, i, r)| DrTerm::Observed {
                user: u,
                item: i,
                rating: r,
                imputed: rng.uniform_range(1.0, 5.0),
                weight: rng.uniform_range(0.5, 3.0),
                reg_weight: 0.2,
            })
            .collect();
        for (u, i, _) in random_rows(&mut rng, 5) {
            batch.push(DrTerm::Pair {
                user: u,
                item: i,
                imputed: rng.uniform_range(1.0, 5.0),
                weight: rng.uniform_range(0.1, 1.0),
                reg_weight: 0.0,
            });
        }
        let mut g = Gradient::for_model(&m);
        dr_prediction(&m, &batch, 0.05, Some(&mut g));
        let numeric = numeric_gradient(&m.to_flat(), STEP, |x| {
            let mut probe = m.clone();
            probe.set_flat(x);
            dr_prediction(&probe, &batch, 0.05, None)
        });
        let err = relative_error(&g.to_flat(), &numeric);
        worst = worst.max(err);
    }
    worst
}

/// Worst relative gradient error of the imputation objective.
pub fn imputation_error() -> f64 {
    let mut worst: f64 = 0.0;
    let meta = explicit_meta(4, 4);
    for point in 0..POINTS {
        let mut rng = SeededRng::new(300 + point);
        let m = random_model(&meta, 3, 0.5, &mut rng);
        let mut imp = ImputationModel::new(4, rng.uniform_range(2.5, 3.5), 1.0, 5.0);
        for x in imp.item_offset.iter_mut() {
            *x = rng.uniform_range(-0.5, 0.5);
        }
        let mut batch: Vec<ImputationTerm> = random_rows(&mut rng, 6)
            .into_iter()
            .map(|(u, i, r)| ImputationTerm::Observed {
                user: u,
                item: i,
                rating: r,
                weight: rng.uniform_range(0.2, 2.0),
            })
            .collect();
        for (_, i, r) in random_rows(&mut rng, 4) {
            batch.push(ImputationTerm::Supervised {
                item: i,
                rating: r,
                weight: rng.uniform_range(0.2, 1.0),
            });
        }
        let mut g = ImputationGradient {
            global: 0.0,
            item_offset: vec![0.0; 4],
        };
        imputation_objective(&imp, &m, &batch, Some(&mut g));
        let mut params = vec![imp.global];
        params.extend_from_slice(&imp.item_offset);
        let numeric = numeric_gradient(&params, STEP, |x| {
            let mut probe = imp.clone();
            probe.global = x[0];
            probe.item_offset.copy_from_slice(&x[1..]);
            imputation_objective(&probe, &m, &batch, None)
        });
        let mut analytic = vec![g.global];
        analytic.extend_from_slice(&g.item_offset);
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
    }
    worst
}

/// Worst relative error of the meta-gradient.
pub fn meta_gradient_error() -> f64 {
    let mut worst: f64 = 0.0;
    let meta = explicit_meta(4, 4);
    let hp = HyperParams {
        learning_rate: 0.3,
        l2_reg: 0.05,
        imputation_weight: 0.7,
        ..Default::default()
    };
    for point in 0..POINTS {
        let mut rng = SeededRng::new(400 + point);
        let m = random_model(&meta, 3, 0.5, &mut rng);
        let mut log = Vec::new();
        for k in 0..16 {
            if rng.bernoulli(0.6) {
                log.push(Interaction::new(
                    k / 4,
                    k % 4,
                    (1 + rng.below(5)) as f64,
                    Source::BiasedLog,
                ));
            }
        }
        let features = MetaFeatures::from_log(&log, &meta);
        let mut w = MetaWeights::zeros(&features, &meta);
        let params: Vec<f64> = w.params().iter().map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        w.set_params(&params);
        let batch = MetaBatch {
            observed: random_rows(&mut rng, 5),
            pairs: random_rows(&mut rng, 4).into_iter().map(|(u, i, _)| (u, i)).collect(),
            uniform: random_rows(&mut rng, 4),
        };
        let (loss, analytic) = meta_gradient(&m, &w, &features, &batch, &hp);
        assert_eq!(loss, meta_loss(&m, &w, &features, &batch, &hp));
        let numeric = numeric_gradient(&params, STEP, |x| {
            let mut probe = w.clone();
            probe.set_params(x);
            meta_loss(&m, &probe, &features, &batch, &hp)
        });
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
    }
    worst
}

fn full_matrix(rng: &mut SeededRng) -> (Vec<f64>, Vec<f64>) {
    let truth: Vec<f64> = (0..25).map(|_| (1 + rng.below(5)) as f64).collect();
    let pred: Vec<f64> = (0..25).map(|_| rng.uniform_range(1.0, 5.0)).collect();
    (truth, pred)
}

/// Largest gap between the DR risk with exact imputation and the true risk.
pub fn exact_imputation_gap() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = SeededRng::new(7);
    for _ in 0..20 {
        let (truth, pred) = full_matrix(&mut rng);
        let true_risk = truth.iter().zip(&pred).map(|(r, s)| (s - r).powi(2)).sum::<f64>() / 25.0;
        let pairs: Vec<DrPair> = truth
            .iter()
            .zip(&pred)
            .map(|(r, s)| {
                let e = (s - r).powi(2);
                DrPair {
                    error: e,
                    imputed_error: e,
                    observed: rng.bernoulli(0.3),
                    propensity: rng.uniform_range(0.01, 1.0),
                }
            })
            .collect();
        worst = worst.max((dr_risk(&pairs) - true_risk).abs());
    }
    worst
}

/// Monte Carlo check of DR with exact propensities: `(mean, true risk, standard error)`.
pub fn dr_monte_carlo() -> (f64, f64, f64) {
    let out = debias::ingest::generate_synthetic(&debias::ingest::SyntheticConfig {
        name: "tiny".into(),
        num_users: 5,
        num_items: 5,
        latent_dim: 2,
        slots: 2,
        position_decay: 0.9,
        popularity_skew: 1.0,
        biased_impressions: 5,
        randomized_impressions: 5,
        purchase_noise: 0.0,
        seed: 8,
    })
    .unwrap();
    let truth = &out.ground_truth.probabilities;
    // a deliberately poor predictor and a constant (wrong) imputation
    let pred: Vec<f64> = (0..25).map(|k| 0.2 + 0.6 * ((k * 7) % 5) as f64 / 4.0).collect();
    let imputed = 0.3;
    // missing-not-at-random logging: propensity grows with preference
    let propensity: Vec<f64> = truth.iter().map(|p| 0.15 + 0.7 * p).collect();
    let true_risk = truth.iter().zip(&pred).map(|(r, s)| (s - r).powi(2)).sum::<f64>() / 25.0;

    let mut rng = SeededRng::new(31);
    let draws: Vec<f64> = (0..200)
        .map(|_| {
            let pairs: Vec<DrPair> = (0..25)
                .map(|k| DrPair {
                    error: (pred[k] - truth[k]).powi(2),
                    imputed_error: (pred[k] - imputed).powi(2),
                    observed: rng.bernoulli(propensity[k]),
                    propensity: propensity[k],
                })
                .collect();
            dr_risk(&pairs)
        })
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, true_risk, sd / n.sqrt())
}

/// Fraction of correctly ordered positive/negative pairs, ties counted 1/2.
pub fn pairwise_auc(scored: &[(f64, bool)]) -> f64 {
    let mut good = 0.0;
    let mut total = 0.0;
    for &(sp, lp) in scored {
        if !lp {
            continue;
        }
        for &(sn, ln) in scored {
            if ln {
                continue;
            }
            total += 1.0;
            if sp > sn {
                good += 1.0;
            } else if sp == sn {
                good += 0.5;
            }
        }
    }
    good / total
}

/// Largest gap between gini, entropy, ndcg and auc and their hand-derived values.
pub fn hand_value_gap() -> f64 {
    use debias::metrics::{auc, entropy, gini, ndcg_at_k};
    [
        gini(&[1.0, 3.0]).unwrap() - 0.25,
        gini(&[0.0, 0.0, 1.0]).unwrap() - 2.0 / 3.0,
        entropy(&[0.5, 0.25, 0.25]).unwrap() - 1.5 * 2f64.ln(),
        entropy(&[0.25; 4]).unwrap() - 4f64.ln(),
        ndcg_at_k(&[0.0, 1.0], &[0.0, 1.0], 2) - 1.0 / 3f64.log2(),
        auc(&[(0.9, true), (0.8, false), (0.7, true), (0.6, false)]).unwrap() - 0.75,
    ]
    .iter()
    .fold(0.0, |acc: f64, d| acc.max(d.abs()))
}

fn trajectory(run: impl FnOnce(StepHook<'_>)) -> Vec<Vec<f64>> {
    let mut steps = Vec::new();
    run(&mut |m: &MfModel| steps.push(m.to_flat()));
    steps
}

/// Trains MF and IPS with unit propensities from the same seed and compares
/// every intermediate parameter vector bit for bit.
pub fn ips_unit_propensities_match_mf() -> bool {
    let split = small_split(3);
    let hp = quick_hp();
    let ones = Propensities::ones(split.meta.num_items);
    let mf = trajectory(|hook| {
        train_mf_with_hook(&split, &hp, 9, TrainingSource::Biased, hook).unwrap();
    });
    let ips = trajectory(|hook| {
        train_ips_with_hook(&split, &hp, 9, &ones, hook).unwrap();
    });
    !mf.is_empty()
        && mf.len() == ips.len()
        && mf
            .iter()
            .zip(&ips)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
}
