mod common;

use common::*;
use debias::data::*;
use debias::ingest::*;
use debias::metrics::gini;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn base_config() -> SyntheticConfig {
    SyntheticConfig {
        name: "knobs".into(),
        num_users: 20_000,
        num_items: 10,
        latent_dim: 4,
        slots: 10,
        position_decay: 1.0,
        popularity_skew: 0.0,
        biased_impressions: 100_000,
        randomized_impressions: 100_000,
        purchase_noise: 0.05,
        seed: 23,
    }
}

fn item_counts(ds: &Dataset) -> Vec<f64> {
    let mut c = vec![0.0; ds.num_items];
    for x in &ds.interactions {
        c[x.item] += 1.0;
    }
    c
}

/// Two-sample chi-square homogeneity test on a 2 x K table.
fn homogeneity_p_value(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let n = na + nb;
    let mut stat = 0.0;
    for (x, y) in a.iter().zip(b) {
        let col = x + y;
        let ea = na * col / n;
        let eb = nb * col / n;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dist = ChiSquared::new((a.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn no_bias_knobs_means_matching_exposure() {
    let out = generate_synthetic(&base_config()).unwrap();
    let biased = item_counts(&out.biased);
    let randomized = item_counts(out.randomized.as_ref().unwrap());
    let p = homogeneity_p_value(&biased, &randomized);
    assert!(p > 0.01, "exposure histograms differ, p = {p}");
}

#[test]
fn strong_selection_bias_concentrates_impressions() {
    let cfg = SyntheticConfig {
        slots: 3,
        popularity_skew: 3.0,
        position_decay: 0.8,
        biased_impressions: 10_000,
        randomized_impressions: 10_000,
        ..base_config()
    };
    let out = generate_synthetic(&cfg).unwrap();
    let biased = item_counts(&out.biased);
    let randomized = item_counts(out.randomized.as_ref().unwrap());
    assert!(gini(&biased).unwrap() > gini(&randomized).unwrap());
    // the most popular item's share is far above the uniform 1/num_items
    let share = biased[0] / biased.iter().sum::<f64>();
    assert!(share > 1.0 / cfg.num_items as f64, "{share}");
}

#[test]
fn preset_sizes() {
    let b = SyntheticConfig::set_b();
    assert_eq!((b.biased_impressions, b.randomized_impressions), (100_000, 218_000));
    let a = SyntheticConfig::set_a();
    assert_eq!(a.randomized_impressions, 0);
    let small = SyntheticConfig {
        num_users: 3_000,
        biased_impressions: 10_000,
        randomized_impressions: 20_000,
        ..SyntheticConfig::set_b()
    };
    let out = generate_synthetic(&small).unwrap();
    assert_eq!(out.biased.interactions.len(), 10_000);
    assert_eq!(out.randomized.unwrap().interactions.len(), 20_000);
}

#[test]
fn split_sizes_follow_rounding_rule() {
    let ratios = SplitRatios::STANDARD;
    for (n, expected) in [(20, (1, 1, 18)), (100, (5, 5, 90)), (54_000, (2_700, 2_700, 48_600))] {
        let rows = randomized_rows(n);
        let parts = split_randomized(&rows, ratios, 1).unwrap();
        let got = (parts.d_u.len(), parts.d_v.len(), parts.d_te.len());
        assert_eq!(got, expected, "n = {n}");
        let mut union: Vec<_> = parts
            .d_u
            .iter()
            .chain(&parts.d_v)
            .chain(&parts.d_te)
            .map(|x| (x.user, x.item))
            .collect();
        let mut input: Vec<_> = rows.iter().map(|x| (x.user, x.item)).collect();
        union.sort_unstable();
        input.sort_unstable();
        assert_eq!(union, input);
    }
}

#[test]
fn canonical_round_trip_keeps_synthetic_output() {
    let out = generate_synthetic(&SyntheticConfig {
        num_users: 300,
        biased_impressions: 900,
        randomized_impressions: 600,
        ..base_config()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    for ds in [&out.biased, out.randomized.as_ref().unwrap()] {
        let path = dir.path().join("rows.csv");
        write_canonical(ds, &path).unwrap();
        assert_eq!(&read_canonical(&path).unwrap().interactions, &ds.interactions);
    }
}

#[test]
fn loader_output_always_validates() {
    let dir = tempfile::tempdir().unwrap();
    let biased = "0 3 0 5\n1 0 0 0\n";
    let uniform = "2 0 4 0\n0 0 0 1\n";
    std::fs::write(dir.path().join(COAT_BIASED_FILE), biased).unwrap();
    std::fs::write(dir.path().join(COAT_RANDOMIZED_FILE), uniform).unwrap();
    let (b, r) = load_coat(dir.path()).unwrap();
    assert!(validate_dataset(&b).is_empty() && validate_dataset(&r).is_empty());
    assert_eq!(b.interactions.len(), 3);
    assert_eq!(r.interactions.len(), 3);
}

proptest! {
    #[test]
    fn split_partitions_input(n in 1usize..400, seed in any::<u64>(), a in 0.01f64..0.4, b in 0.01f64..0.4) {
        let ratios = SplitRatios::new(a, b, 1.0 - a - b).unwrap();
        let rows = randomized_rows(n);
        let parts = split_randomized(&rows, ratios, seed).unwrap();
        let again = split_randomized(&rows, ratios, seed).unwrap();
        prop_assert_eq!(&parts, &again);
        let (nu, nv, nt) = ratios.sizes(n);
        prop_assert_eq!((parts.d_u.len(), parts.d_v.len(), parts.d_te.len()), (nu, nv, nt));
        let mut union: Vec<_> = parts.d_u.iter().chain(&parts.d_v).chain(&parts.d_te).map(|x| (x.user, x.item)).collect();
        union.sort_unstable();
        let mut input: Vec<_> = rows.iter().map(|x| (x.user, x.item)).collect();
        input.sort_unstable();
        prop_assert_eq!(union, input);
    }

    #[test]
    fn canonical_round_trip(
        rows in prop::collection::btree_set((0usize..6, 0usize..5, any::<bool>()), 1..20),
        ratings in prop::collection::vec(1u8..=5, 20),
    ) {
        let meta = explicit_meta(6, 5);
        let interactions: Vec<Interaction> = rows
            .iter()
            .zip(&ratings)
            .map(|(&(u, i, rand), &r)| {
                let source = if rand { Source::Randomized } else { Source::BiasedLog };
                Interaction::new(u, i, r as f64, source)
            })
            .collect();
        let ds = dataset(&meta, interactions);
        prop_assert!(validate_dataset(&ds).is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_canonical(&ds, &path).unwrap();
        let back = read_canonical(&path).unwrap();
        prop_assert_eq!(back.interactions, ds.interactions);
    }
}
