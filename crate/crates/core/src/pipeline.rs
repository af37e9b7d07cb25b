//! End-to-end cohort construction over in-memory user documents.

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use serde::Serialize;

use crate::cohort::{
    assign_splits, build_control_pool, cohort_records, match_controls, partition, select_diagnosed, split_balance,
    CohortRecord, Dataset, DatasetPartition, MatchedCohort, Role, Selection, SelectionConfig, SplitRatios,
    TARGET_CONTROLS,
};
use crate::mhfilter::{scrub_user, strip_removal_terms, MhPolicy};
use crate::pattern::{Lexicons, PatternSet};
use crate::{Condition, Error, Post, Result, UserDoc};

#[derive(Debug, Clone, Copy)]
pub struct BuildConfig {
    pub selection: SelectionConfig,
    pub target_controls: usize,
    pub ratios: SplitRatios,
    pub split_seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            selection: SelectionConfig::default(),
            target_controls: TARGET_CONTROLS,
            ratios: SplitRatios::default(),
            split_seed: 0,
        }
    }
}

/// Counts reported alongside a built cohort.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub users: usize,
    pub candidates: usize,
    pub diagnosed: usize,
    pub rejected_negative: usize,
    pub rejected_sparse: usize,
    pub control_pool: usize,
    pub smhd: usize,
    pub smhd_rc: usize,
    pub matched_controls: usize,
    pub leftover_pool: usize,
    pub split_balance: BTreeMap<Condition, [usize; 3]>,
}

#[derive(Debug, Clone)]
pub struct Built {
    pub selection: Selection,
    pub cohort: MatchedCohort,
    pub partition: DatasetPartition,
    pub records: Vec<CohortRecord>,
    pub summary: BuildSummary,
}

/// Selects diagnosed users, matches controls from the remaining users and
/// assigns datasets and splits.
///
/// Every user with a positive diagnosis match is kept out of the control
/// pool, including those rejected for a negative trigger or too few posts.
pub fn build_cohort(
    users: &BTreeMap<String, UserDoc>,
    set: &PatternSet,
    lexicons: &Lexicons,
    policy: &MhPolicy,
    cfg: &BuildConfig,
) -> Result<Built> {
    let selection = select_diagnosed(users, set, lexicons, policy, cfg.selection);
    let pool = build_control_pool(users, policy, &selection.candidates, cfg.selection.min_posts);
    info!(
        "{} diagnosed users, {} pool candidates",
        selection.diagnosed.len(),
        pool.len()
    );
    let cohort = match_controls(&selection.diagnosed, &pool, cfg.target_controls)?;
    let parts = assign_splits(&partition(&cohort, cfg.target_controls), &cohort, cfg.ratios, cfg.split_seed)?;
    let records = cohort_records(&selection.diagnosed, &cohort, &parts)?;
    let summary = BuildSummary {
        users: users.len(),
        candidates: selection.candidates.len(),
        diagnosed: selection.diagnosed.len(),
        rejected_negative: selection.rejected_negative.len(),
        rejected_sparse: selection.rejected_sparse.len(),
        control_pool: pool.len(),
        smhd: parts.smhd.len(),
        smhd_rc: parts.smhd_rc.len(),
        matched_controls: cohort.assignments.values().map(Vec::len).sum(),
        leftover_pool: cohort.leftover_pool.len(),
        split_balance: split_balance(&parts, &selection.diagnosed),
    };
    Ok(Built {
        selection,
        cohort,
        partition: parts,
        records,
        summary,
    })
}

/// Records belonging to the requested datasets.
pub fn filter_datasets(records: &[CohortRecord], datasets: &[Dataset]) -> Vec<CohortRecord> {
    records.iter().filter(|r| datasets.contains(&r.dataset)).cloned().collect()
}

/// Cleaned documents for every cohort user: diagnosed users lose their
/// mental-health and removal-term posts, controls lose removal-term posts.
pub fn cohort_docs(
    records: &[CohortRecord],
    users: &BTreeMap<String, UserDoc>,
    policy: &MhPolicy,
) -> Result<BTreeMap<String, UserDoc>> {
    let mut out = BTreeMap::new();
    for r in records {
        if out.contains_key(&r.user_id) {
            continue;
        }
        let doc = users
            .get(&r.user_id)
            .ok_or_else(|| Error::insufficient(format!("cohort user {} has no posts in the corpus", r.user_id)))?;
        let clean = match r.role {
            Role::Diagnosed => scrub_user(doc, policy),
            Role::Control => strip_removal_terms(doc, policy),
        };
        out.insert(r.user_id.clone(), clean);
    }
    Ok(out)
}

/// Groups already-validated posts into user documents.
pub fn group_posts(posts: impl IntoIterator<Item = Post>) -> BTreeMap<String, UserDoc> {
    let mut by: BTreeMap<String, Vec<Post>> = BTreeMap::new();
    for p in posts {
        by.entry(p.user_id.clone()).or_default().push(p);
    }
    by.into_iter().map(|(u, p)| (u.clone(), UserDoc::new(u, p))).collect()
}

/// Ids of the users named in `records`.
pub fn record_users(records: &[CohortRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.user_id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn small_synthetic_build() {
        let cfg = SynthConfig {
            diagnosed: [(Condition::Depression, 5), (Condition::Ptsd, 3)].into(),
            controls: 90,
            negated: 2,
            sparse: 2,
            ..SynthConfig::default()
        };
        let corpus = generate(&cfg).unwrap();
        let users = group_posts(corpus.posts);
        let built = build_cohort(
            &users,
            &assets::patterns().unwrap(),
            &assets::lexicons().unwrap(),
            &assets::policy().unwrap(),
            &BuildConfig::default(),
        )
        .unwrap();
        assert_eq!(built.summary.diagnosed, 8);
        assert_eq!(built.summary.rejected_negative, 2);
        assert_eq!(built.summary.rejected_sparse, 2);
        assert_eq!(built.summary.control_pool, 90);
        let docs = cohort_docs(&built.records, &users, &assets::policy().unwrap()).unwrap();
        assert_eq!(docs.len(), built.records.len());
        for r in built.records.iter().filter(|r| r.role == Role::Diagnosed) {
            assert_eq!(docs[&r.user_id].post_count() + 1, users[&r.user_id].post_count());
        }
    }
}
