use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use smhd_core::classify::{apply_threshold, evaluate, gold_labels, train, ModelKind, TrainConfig};
use smhd_core::cohort::{read_cohort, write_cohort, Role};
use smhd_core::metrics::{fbeta, Counts};
use smhd_core::pipeline::{build_cohort, cohort_docs, group_posts, BuildConfig, Built};
use smhd_core::psycholing::t_cdf;
use smhd_core::stats::{concomitance, condition_counts, dataset_stats};
use smhd_core::synth::{generate, ComorbidGroup, SynthConfig};
use smhd_core::{assets, Condition, UserDoc};

fn normal_pair(rng: &mut Pcg64) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    (r * a.cos(), r * a.sin())
}

/// Student t draws as Z / sqrt(chi2_df / df) from Box-Muller normals.
fn t_samples(df: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut buf: Vec<f64> = Vec::new();
    let mut next = |rng: &mut Pcg64| {
        if buf.is_empty() {
            let (a, b) = normal_pair(rng);
            buf.push(a);
            buf.push(b);
        }
        buf.pop().unwrap()
    };
    (0..n)
        .map(|_| {
            let z = next(&mut rng);
            let chi: f64 = (0..df).map(|_| next(&mut rng).powi(2)).sum();
            z / (chi / df as f64).sqrt()
        })
        .collect()
}

#[test]
fn t_cdf_matches_monte_carlo() {
    const N: usize = 1_000_000;
    let points: [(usize, &[f64]); 5] = [
        (1, &[-3.0, -0.5, 0.8, 6.0]),
        (2, &[-2.0, 0.2, 1.5, 4.0]),
        (3, &[-1.0, 0.0, 2.4, 5.0]),
        (5, &[-2.6, -0.1, 1.0, 3.2]),
        (12, &[-1.8, 0.4, 1.3, 2.9]),
    ];
    let mut checked = 0;
    for (k, (df, ts)) in points.iter().enumerate() {
        let mut samples = t_samples(*df, N, 77 + k as u64);
        samples.sort_by(f64::total_cmp);
        for &t in *ts {
            let below = samples.partition_point(|&x| x <= t) as f64 / N as f64;
            let f = t_cdf(t, *df as f64);
            let sigma = (f * (1.0 - f) / N as f64).sqrt();
            assert!((below - f).abs() <= 3.0 * sigma, "df {df} t {t}: empirical {below}, cdf {f}, sigma {sigma}");
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
}

fn small_build(seed: u64, controls: usize) -> (BTreeMap<String, UserDoc>, Built) {
    let cfg = SynthConfig {
        seed,
        diagnosed: [(Condition::Depression, 12), (Condition::Ocd, 5), (Condition::Autism, 4)].into(),
        comorbid: vec![ComorbidGroup {
            conditions: vec![Condition::Depression, Condition::Anxiety],
            count: 4,
        }],
        controls,
        negated: 2,
        sparse: 2,
        posts_per_user: (51, 150),
        tokens_per_post: (1, 3),
        background_vocab: 200,
        subreddits: SynthConfig::default().subreddits[..8].to_vec(),
        subreddits_per_user: (1, 2),
        ..SynthConfig::default()
    };
    let users = group_posts(generate(&cfg).unwrap().posts);
    let built = build_cohort(
        &users,
        &assets::patterns().unwrap(),
        &assets::lexicons().unwrap(),
        &assets::policy().unwrap(),
        &BuildConfig::default(),
    )
    .unwrap();
    (users, built)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cohort_partition_invariants(seed in 0u64..1000, controls in 20usize..300) {
        let (_, built) = small_build(seed, controls);
        let diag: BTreeSet<&str> = built.selection.diagnosed.iter().map(|d| d.user_id.as_str()).collect();
        let assigned: Vec<&String> = built.cohort.assignments.values().flatten().collect();
        prop_assert!(assigned.iter().all(|c| !diag.contains(c.as_str())));
        prop_assert_eq!(assigned.len() + built.cohort.leftover_pool.len(), built.summary.control_pool);
        let p = &built.partition;
        prop_assert!(p.smhd.is_disjoint(&p.smhd_rc));
        prop_assert_eq!(p.smhd.len() + p.smhd_rc.len(), diag.len());
        for (d, cs) in &built.cohort.assignments {
            for c in cs {
                prop_assert_eq!(p.split[c], p.split[d]);
            }
        }
        let roles: BTreeMap<&str, Role> = built.records.iter().map(|r| (r.user_id.as_str(), r.role)).collect();
        prop_assert_eq!(roles.len(), built.records.len());
    }

    #[test]
    fn stats_round_trip_and_integrality(seed in 0u64..1000) {
        let (users, built) = small_build(seed, 150);
        let mut buf = Vec::new();
        write_cohort(&mut buf, &built.records).unwrap();
        let back = read_cohort(&buf[..]).unwrap();
        let docs = cohort_docs(&back, &users, &assets::policy().unwrap()).unwrap();
        let before = dataset_stats(&built.records, &docs).unwrap();
        let after = dataset_stats(&back, &docs).unwrap();
        prop_assert_eq!(&before, &after);

        let counts = condition_counts(&back);
        let sum: usize = counts.counts.values().sum();
        prop_assert!(sum >= counts.diagnosed_users);
        prop_assert_eq!(sum == counts.diagnosed_users, counts.multi_diagnosis_fraction == 0.0);

        let m = concomitance(&back);
        for (i, row) in m.rows.iter().enumerate() {
            let n = counts.counts[&Condition::ALL[i]] as f64;
            for &v in row {
                prop_assert!((0.0..=1.0).contains(&v));
                let scaled = v * n;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9, "{} * {} is not integral", v, n);
            }
        }
    }
}

#[test]
fn micro_f1_and_frozen_vocabulary() {
    let (users, built) = small_build(3, 300);
    let docs = cohort_docs(&built.records, &users, &assets::policy().unwrap()).unwrap();
    let cfg = TrainConfig {
        kind: ModelKind::Logreg,
        min_token_count: 5,
        ..TrainConfig::default()
    };
    let model = train(&built.records, &docs, &cfg).unwrap();
    let vocab = model.vocab_len().unwrap();
    let gold = gold_labels(&built.records, None);
    let everyone: BTreeSet<String> = gold.keys().cloned().collect();
    let predictions = model.predict(&docs, &everyone).unwrap();
    assert_eq!(model.vocab_len(), Some(vocab));
    let predicted = apply_threshold(&predictions, 0.5);
    let report = evaluate(&predicted, &gold, &BTreeMap::new()).unwrap();
    let micro = report.multi_label;
    let counts = Counts {
        tp: micro.tp,
        fp: micro.fp,
        fn_: micro.fn_,
    };
    assert_eq!(micro.f1, 100.0 * fbeta(counts.precision(), counts.recall(), 1.0).unwrap());
    assert_eq!(micro.tp + micro.fn_, gold.values().map(|g| g.len() as u64).sum::<u64>());
}
