//! Shared fixtures for the pipeline benchmarks.

use std::collections::BTreeMap;

use smhd_core::cohort::CohortRecord;
use smhd_core::pipeline::{build_cohort, cohort_docs, group_posts, BuildConfig};
use smhd_core::synth::{generate, SynthConfig};
use smhd_core::{assets, Condition, Post, UserDoc};

pub struct Fixture {
    /// The corpus as an NDJSON dump.
    pub ndjson: Vec<u8>,
    pub posts: Vec<Post>,
    pub users: BTreeMap<String, UserDoc>,
    pub records: Vec<CohortRecord>,
    /// Cleaned documents of the cohort users.
    pub docs: BTreeMap<String, UserDoc>,
}

/// A seeded corpus with `diagnosed` users spread over three conditions and
/// ten controls per diagnosed user.
pub fn fixture(diagnosed: usize) -> Fixture {
    let third = diagnosed / 3;
    let cfg = SynthConfig {
        seed: 1,
        diagnosed: [
            (Condition::Depression, diagnosed - 2 * third),
            (Condition::Anxiety, third),
            (Condition::Adhd, third),
        ]
        .into(),
        controls: diagnosed * 10,
        shift_strength: 0.2,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg).expect("fixture config is feasible");
    let mut ndjson = Vec::new();
    corpus.write_posts(&mut ndjson).expect("write to memory");
    let users = group_posts(corpus.posts.clone());
    let built = build_cohort(
        &users,
        &assets::patterns().unwrap(),
        &assets::lexicons().unwrap(),
        &assets::policy().unwrap(),
        &BuildConfig::default(),
    )
    .expect("fixture builds");
    let docs = cohort_docs(&built.records, &users, &assets::policy().unwrap()).expect("cohort users exist");
    Fixture {
        ndjson,
        posts: corpus.posts,
        users,
        records: built.records,
        docs,
    }
}
