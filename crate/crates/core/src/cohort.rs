//! Diagnosed-user selection, control matching and dataset partitioning.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::UserDoc;
use crate::mhfilter::{is_mh_post, scrub_user, strip_removal_terms, MhPolicy};
use crate::pattern::{self, Lexicons, PatternSet};
use crate::{Condition, Error, Result};

/// Minimum number of posts left after scrubbing for diagnosed users and
/// controls alike.
pub const MIN_POSTS: usize = 50;
/// Controls matched per diagnosed user; also the main-dataset threshold.
pub const TARGET_CONTROLS: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosedUser {
    pub user_id: String,
    pub conditions: BTreeSet<Condition>,
    /// Posts left after scrubbing.
    pub clean_post_count: usize,
    /// Every subreddit the user posted in.
    pub subreddits: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCandidate {
    pub user_id: String,
    /// Posts left after removal-term posts are dropped.
    pub post_count: usize,
    pub subreddits: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionConfig {
    pub max_dist: usize,
    pub min_posts: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_dist: 40,
            min_posts: MIN_POSTS,
        }
    }
}

/// Outcome of [`select_diagnosed`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    /// Accepted users, ascending by id.
    pub diagnosed: Vec<DiagnosedUser>,
    /// Every user with at least one positive condition match.
    pub candidates: BTreeSet<String>,
    pub rejected_negative: BTreeSet<String>,
    pub rejected_sparse: BTreeSet<String>,
}

enum Screen {
    NotCandidate,
    Negative,
    Sparse,
    Accepted(DiagnosedUser),
}

fn screen_user(
    doc: &UserDoc,
    set: &PatternSet,
    lexicons: &Lexicons,
    policy: &MhPolicy,
    cfg: SelectionConfig,
) -> Screen {
    let mut conditions = BTreeSet::new();
    let mut negative = false;
    for post in doc.posts() {
        let folded = crate::text::fold(&post.text);
        let triggers = pattern::find_triggers_folded(&folded, set);
        if triggers.iter().any(|t| t.polarity == pattern::Polarity::Negative) {
            negative = true;
        }
        for m in pattern::keywords_near_triggers(&post.id, &folded, &triggers, lexicons) {
            if m.gap_chars <= cfg.max_dist {
                conditions.insert(m.condition);
            }
        }
    }
    if conditions.is_empty() {
        return Screen::NotCandidate;
    }
    if negative {
        return Screen::Negative;
    }
    let clean = scrub_user(doc, policy);
    if clean.post_count() < cfg.min_posts {
        return Screen::Sparse;
    }
    Screen::Accepted(DiagnosedUser {
        user_id: doc.user_id().to_string(),
        conditions,
        clean_post_count: clean.post_count(),
        subreddits: doc.subreddits().clone(),
    })
}

/// Users with at least one positive diagnosis match, no negative trigger in
/// any post, and at least `min_posts` posts left after scrubbing.
///
/// A negative trigger anywhere in a user's history excludes the user for
/// every condition.
pub fn select_diagnosed(
    users: &BTreeMap<String, UserDoc>,
    set: &PatternSet,
    lexicons: &Lexicons,
    policy: &MhPolicy,
    cfg: SelectionConfig,
) -> Selection {
    let screened: Vec<(&String, Screen)> = users
        .par_iter()
        .map(|(id, doc)| (id, screen_user(doc, set, lexicons, policy, cfg)))
        .collect();
    let mut sel = Selection::default();
    for (id, screen) in screened {
        match screen {
            Screen::NotCandidate => continue,
            Screen::Negative => {
                sel.rejected_negative.insert(id.clone());
            }
            Screen::Sparse => {
                sel.rejected_sparse.insert(id.clone());
            }
            Screen::Accepted(user) => sel.diagnosed.push(user),
        }
        sel.candidates.insert(id.clone());
    }
    info!(
        "{} diagnosis candidates, {} accepted, {} negated, {} below {} posts",
        sel.candidates.len(),
        sel.diagnosed.len(),
        sel.rejected_negative.len(),
        sel.rejected_sparse.len(),
        cfg.min_posts
    );
    sel
}

/// Users with no mental-health post and at least `min_posts` posts once
/// removal-term posts are dropped. Ids in `exclude` never enter the pool.
pub fn build_control_pool(
    users: &BTreeMap<String, UserDoc>,
    policy: &MhPolicy,
    exclude: &BTreeSet<String>,
    min_posts: usize,
) -> Vec<ControlCandidate> {
    users
        .par_iter()
        .filter(|(id, _)| !exclude.contains(*id))
        .filter(|(_, doc)| !doc.posts().iter().any(|p| is_mh_post(p, policy)))
        .filter_map(|(id, doc)| {
            let kept = strip_removal_terms(doc, policy);
            (kept.post_count() >= min_posts).then(|| ControlCandidate {
                user_id: id.clone(),
                post_count: kept.post_count(),
                subreddits: doc.subreddits().clone(),
            })
        })
        .collect()
}

/// Controls assigned to each diagnosed user.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedCohort {
    pub assignments: BTreeMap<String, Vec<String>>,
    pub leftover_pool: BTreeSet<String>,
    /// Set when matching ran against an empty pool.
    pub empty_pool: bool,
}

/// Compares `|ln(a/d)|` against `|ln(b/d)|` exactly, using integer ratios.
fn log_ratio_cmp(a: usize, b: usize, d: usize) -> Ordering {
    let (a_hi, a_lo) = (a.max(d) as u128, a.min(d) as u128);
    let (b_hi, b_lo) = (b.max(d) as u128, b.min(d) as u128);
    (a_hi * b_lo).cmp(&(b_hi * a_lo))
}

/// Whether a control with `control_posts` posts may match a diagnosed user
/// with `diagnosed_posts`: inclusive bounds `[d/2, 2d]`.
pub fn post_ratio_ok(diagnosed_posts: usize, control_posts: usize) -> bool {
    2 * control_posts >= diagnosed_posts && control_posts <= 2 * diagnosed_posts
}

/// Greedy matching without replacement.
///
/// Diagnosed users are processed in ascending id order. Each takes up to
/// `target` unused pool members that share a subreddit with it and whose
/// post count lies in `[p/2, 2p]`, preferring the smallest `|ln(p_c/p)|`
/// and then the smaller id.
pub fn match_controls(
    diagnosed: &[DiagnosedUser],
    pool: &[ControlCandidate],
    target: usize,
) -> Result<MatchedCohort> {
    if target == 0 {
        return Err(Error::invalid("target must be at least 1"));
    }
    let mut order: Vec<&DiagnosedUser> = diagnosed.iter().collect();
    order.sort_by(|a, b| a.user_id.cmp(&b.user_id));

    let mut pool_sorted: Vec<&ControlCandidate> = pool.iter().collect();
    pool_sorted.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let mut by_subreddit: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, c) in pool_sorted.iter().enumerate() {
        for s in &c.subreddits {
            by_subreddit.entry(s.as_str()).or_default().push(i);
        }
    }
    let mut used = vec![false; pool_sorted.len()];
    let mut assignments = BTreeMap::new();

    for d in order {
        let p = d.clean_post_count;
        let mut eligible: Vec<usize> = d
            .subreddits
            .iter()
            .filter_map(|s| by_subreddit.get(s.as_str()))
            .flatten()
            .copied()
            .filter(|&i| !used[i] && post_ratio_ok(p, pool_sorted[i].post_count))
            .collect();
        eligible.sort_unstable();
        eligible.dedup();
        // Pool indices follow id order, so the index is the id tie-break.
        eligible.sort_by(|&x, &y| {
            log_ratio_cmp(pool_sorted[x].post_count, pool_sorted[y].post_count, p).then(x.cmp(&y))
        });
        eligible.truncate(target);
        let chosen: Vec<String> = eligible
            .iter()
            .map(|&i| {
                used[i] = true;
                pool_sorted[i].user_id.clone()
            })
            .collect();
        assignments.insert(d.user_id.clone(), chosen);
    }

    let leftover_pool = pool_sorted
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(c, _)| c.user_id.clone())
        .collect();
    if pool.is_empty() && !diagnosed.is_empty() {
        warn!("control pool is empty; no diagnosed user received controls");
    }
    Ok(MatchedCohort {
        assignments,
        leftover_pool,
        empty_pool: pool.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Smhd,
    SmhdRc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetPartition {
    /// Diagnosed users with at least `target` controls.
    pub smhd: BTreeSet<String>,
    /// Diagnosed users with fewer.
    pub smhd_rc: BTreeSet<String>,
    /// Split of every diagnosed user and every assigned control.
    pub split: BTreeMap<String, Split>,
}

impl DatasetPartition {
    pub fn dataset(&self, diagnosed_id: &str) -> Option<Dataset> {
        if self.smhd.contains(diagnosed_id) {
            Some(Dataset::Smhd)
        } else if self.smhd_rc.contains(diagnosed_id) {
            Some(Dataset::SmhdRc)
        } else {
            None
        }
    }
}

pub fn partition(cohort: &MatchedCohort, target: usize) -> DatasetPartition {
    let mut out = DatasetPartition::default();
    for (id, controls) in &cohort.assignments {
        if controls.len() >= target {
            out.smhd.insert(id.clone());
        } else {
            out.smhd_rc.insert(id.clone());
        }
    }
    out
}

/// Train/dev/test proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::invalid("split ratios must be positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split ratios must sum to 1"));
        }
        Ok(())
    }

    fn bucket(&self, u: f64) -> Split {
        if u < self.train {
            Split::Train
        } else if u < self.train + self.dev {
            Split::Dev
        } else {
            Split::Test
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Murmur3 64-bit finalizer.
fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Position of a user in `[0, 1)` for split bucketing: seeded FNV-1a of the
/// id bytes, then the murmur3 finalizer.
pub fn split_point(user_id: &str, seed: u64) -> f64 {
    let h = fmix64(fnv1a64(user_id.as_bytes()) ^ seed);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Assigns every diagnosed user a split by hashing its id, and gives each
/// assigned control its diagnosed user's split.
pub fn assign_splits(
    partition: &DatasetPartition,
    cohort: &MatchedCohort,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetPartition> {
    ratios.validate()?;
    let mut out = partition.clone();
    out.split.clear();
    for id in partition.smhd.iter().chain(&partition.smhd_rc) {
        let split = ratios.bucket(split_point(id, seed));
        out.split.insert(id.clone(), split);
        if let Some(controls) = cohort.assignments.get(id) {
            for c in controls {
                out.split.insert(c.clone(), split);
            }
        }
    }
    Ok(out)
}

/// Per-condition split counts over the main-dataset diagnosed users.
pub fn split_balance(
    partition: &DatasetPartition,
    diagnosed: &[DiagnosedUser],
) -> BTreeMap<Condition, [usize; 3]> {
    let mut out: BTreeMap<Condition, [usize; 3]> = BTreeMap::new();
    for d in diagnosed.iter().filter(|d| partition.smhd.contains(&d.user_id)) {
        let Some(split) = partition.split.get(&d.user_id) else { continue };
        for c in &d.conditions {
            out.entry(*c).or_default()[*split as usize] += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Diagnosed,
    Control,
}

/// One line of the cohort file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub user_id: String,
    pub role: Role,
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_to: Option<String>,
    pub dataset: Dataset,
    pub split: Split,
}

/// Flattens a matched, partitioned cohort into file records: each diagnosed
/// user in id order, followed by its controls in assignment order.
pub fn cohort_records(
    diagnosed: &[DiagnosedUser],
    cohort: &MatchedCohort,
    partition: &DatasetPartition,
) -> Result<Vec<CohortRecord>> {
    let mut ordered: Vec<&DiagnosedUser> = diagnosed.iter().collect();
    ordered.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let mut out = Vec::new();
    for d in ordered {
        let dataset = partition
            .dataset(&d.user_id)
            .ok_or_else(|| Error::invalid(format!("user {} missing from partition", d.user_id)))?;
        let split = *partition
            .split
            .get(&d.user_id)
            .ok_or_else(|| Error::invalid(format!("user {} has no split", d.user_id)))?;
        out.push(CohortRecord {
            user_id: d.user_id.clone(),
            role: Role::Diagnosed,
            conditions: d.conditions.iter().copied().collect(),
            matched_to: None,
            dataset,
            split,
        });
        for c in cohort.assignments.get(&d.user_id).into_iter().flatten() {
            out.push(CohortRecord {
                user_id: c.clone(),
                role: Role::Control,
                conditions: Vec::new(),
                matched_to: Some(d.user_id.clone()),
                dataset,
                split,
            });
        }
    }
    Ok(out)
}

pub fn write_cohort<W: io::Write>(mut out: W, records: &[CohortRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_cohort<R: BufRead>(reader: R) -> Result<Vec<CohortRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CohortRecord = serde_json::from_str(&line)
            .map_err(|e| Error::asset("cohort", format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
