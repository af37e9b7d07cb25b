//! Descriptive statistics over a built cohort.

use std::collections::BTreeMap;
use std::io;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRecord, Role};
use crate::corpus::UserDoc;
use crate::{Condition, Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub counts: BTreeMap<Condition, usize>,
    pub diagnosed_users: usize,
    pub multi_diagnosis_fraction: f64,
    /// Number of diagnosed users by how many conditions they report.
    pub conditions_per_user: BTreeMap<usize, usize>,
}

fn diagnosed(cohort: &[CohortRecord]) -> impl Iterator<Item = &CohortRecord> {
    cohort.iter().filter(|r| r.role == Role::Diagnosed)
}

pub fn condition_counts(cohort: &[CohortRecord]) -> ConditionCounts {
    let mut counts: BTreeMap<Condition, usize> = Condition::ALL.iter().map(|&c| (c, 0)).collect();
    let mut per_user: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0;
    let mut multi = 0;
    for r in diagnosed(cohort) {
        total += 1;
        for c in &r.conditions {
            *counts.entry(*c).or_default() += 1;
        }
        *per_user.entry(r.conditions.len()).or_default() += 1;
        if r.conditions.len() >= 2 {
            multi += 1;
        }
    }
    ConditionCounts {
        counts,
        diagnosed_users: total,
        multi_diagnosis_fraction: if total == 0 { 0.0 } else { multi as f64 / total as f64 },
        conditions_per_user: per_user,
    }
}

/// Mean and sample standard deviation, plus the count and sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: u64,
    pub total: u64,
    pub mean: f64,
    pub stdev: f64,
}

/// Two-pass summary over integer observations. Stdev is 0 when n < 2.
pub fn summarize(values: &[u64]) -> Summary {
    let n = values.len() as u64;
    if n == 0 {
        return Summary::default();
    }
    let total: u64 = values.iter().sum();
    let mean = total as f64 / n as f64;
    let stdev = if n < 2 {
        0.0
    } else {
        let ss = neumaier(values.iter().map(|&v| {
            let d = v as f64 - mean;
            d * d
        }));
        (ss / (n - 1) as f64).sqrt()
    };
    Summary { n, total, mean, stdev }
}

/// Compensated summation.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupLengths {
    pub users: usize,
    /// Posts per user.
    pub posts: Summary,
    /// Tokens per post, pooled over every post in the group.
    pub tokens: Summary,
    /// Characters per post, pooled over every post in the group.
    pub chars: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub control: GroupLengths,
    pub conditions: BTreeMap<Condition, GroupLengths>,
}

fn group_lengths(docs: &[&UserDoc]) -> GroupLengths {
    let posts: Vec<u64> = docs.iter().map(|d| d.post_count() as u64).collect();
    let tokens: Vec<u64> = docs
        .iter()
        .flat_map(|d| d.post_token_counts().iter().map(|&t| t as u64))
        .collect();
    let chars: Vec<u64> = docs
        .iter()
        .flat_map(|d| d.posts().iter().map(|p| crate::text::char_len(&p.text) as u64))
        .collect();
    GroupLengths {
        users: docs.len(),
        posts: summarize(&posts),
        tokens: summarize(&tokens),
        chars: summarize(&chars),
    }
}

/// Length statistics for the control group and each condition group.
/// `docs` should hold scrubbed documents; a user with several conditions
/// contributes to each of their groups.
pub fn length_stats(cohort: &[CohortRecord], docs: &BTreeMap<String, UserDoc>) -> Result<LengthStats> {
    let lookup = |id: &str| {
        docs.get(id)
            .ok_or_else(|| Error::insufficient(format!("no posts for cohort member {id}")))
    };
    let mut control = Vec::new();
    let mut groups: BTreeMap<Condition, Vec<&UserDoc>> = Condition::ALL.iter().map(|&c| (c, Vec::new())).collect();
    for r in cohort {
        let doc = lookup(&r.user_id)?;
        match r.role {
            Role::Control => control.push(doc),
            Role::Diagnosed => {
                for c in &r.conditions {
                    groups.entry(*c).or_default().push(doc);
                }
            }
        }
    }
    let conditions = groups
        .into_par_iter()
        .map(|(c, g)| (c, group_lengths(&g)))
        .collect();
    Ok(LengthStats {
        control: group_lengths(&control),
        conditions,
    })
}

/// Row-normalized co-occurrence: `rows[i][j]` is the fraction of users with
/// condition `i` who also report condition `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcomitanceMatrix {
    pub conditions: Vec<Condition>,
    pub rows: Vec<Vec<f64>>,
    /// Raw co-occurrence counts; the diagonal holds per-condition user counts.
    pub counts: Vec<Vec<usize>>,
}

pub fn concomitance(cohort: &[CohortRecord]) -> ConcomitanceMatrix {
    let k = Condition::ALL.len();
    let mut counts = vec![vec![0usize; k]; k];
    for r in diagnosed(cohort) {
        for a in &r.conditions {
            for b in &r.conditions {
                counts[a.index()][b.index()] += 1;
            }
        }
    }
    let mut rows = vec![vec![0.0; k]; k];
    for i in 0..k {
        let n = counts[i][i];
        if n == 0 {
            warn!("no users with {}; concomitance row left at zero", Condition::ALL[i]);
        }
        for j in 0..k {
            rows[i][j] = if i == j {
                1.0
            } else if n == 0 {
                0.0
            } else {
                counts[i][j] as f64 / n as f64
            };
        }
    }
    ConcomitanceMatrix {
        conditions: Condition::ALL.to_vec(),
        rows,
        counts,
    }
}

pub fn write_concomitance_tsv<W: io::Write>(mut out: W, m: &ConcomitanceMatrix) -> io::Result<()> {
    write!(out, "condition")?;
    for c in &m.conditions {
        write!(out, "\t{c}")?;
    }
    writeln!(out)?;
    for (c, row) in m.conditions.iter().zip(&m.rows) {
        write!(out, "{c}")?;
        for v in row {
            write!(out, "\t{v:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Everything written to `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub counts: ConditionCounts,
    pub lengths: LengthStats,
    pub concomitance: ConcomitanceMatrix,
}

pub fn dataset_stats(cohort: &[CohortRecord], docs: &BTreeMap<String, UserDoc>) -> Result<DatasetStats> {
    Ok(DatasetStats {
        counts: condition_counts(cohort),
        lengths: length_stats(cohort, docs)?,
        concomitance: concomitance(cohort),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Dataset, Split};
    use crate::Post;
    use Condition::*;

    fn rec(id: &str, conds: &[Condition]) -> CohortRecord {
        CohortRecord {
            user_id: id.into(),
            role: if conds.is_empty() { Role::Control } else { Role::Diagnosed },
            conditions: conds.to_vec(),
            matched_to: None,
            dataset: Dataset::Smhd,
            split: Split::Train,
        }
    }

    fn doc(id: &str, texts: &[&str]) -> UserDoc {
        let posts = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Post {
                id: format!("{id}{i}"),
                user_id: id.into(),
                subreddit: "aww".into(),
                created_utc: i as i64,
                text: t.to_string(),
            })
            .collect();
        UserDoc::new(id, posts)
    }

    #[test]
    fn counts_and_multi_fraction() {
        let c = condition_counts(&[rec("A", &[Depression]), rec("B", &[Depression, Anxiety]), rec("C", &[])]);
        assert_eq!(c.counts[&Depression], 2);
        assert_eq!(c.counts[&Anxiety], 1);
        assert_eq!(c.counts[&Ptsd], 0);
        assert_eq!(c.multi_diagnosis_fraction, 0.5);
        assert_eq!(c.conditions_per_user, [(1, 1), (2, 1)].into());
        let empty = condition_counts(&[]);
        assert_eq!(empty.multi_diagnosis_fraction, 0.0);
        assert!(empty.counts.values().all(|&v| v == 0));
    }

    #[test]
    fn tokens_per_post_hand_values() {
        let docs: BTreeMap<String, UserDoc> = [("A".to_string(), doc("A", &["a b c", "a b c d e"]))].into();
        let s = length_stats(&[rec("A", &[Depression])], &docs).unwrap();
        let g = s.conditions[&Depression];
        assert_eq!(g.tokens.mean, 4.0);
        assert!((g.tokens.stdev - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.tokens.total, 8);
        assert_eq!(g.posts.total, 2);
        assert_eq!(g.posts.stdev, 0.0);
        assert_eq!(s.control.users, 0);
    }

    #[test]
    fn single_post_group_has_zero_stdev() {
        let docs: BTreeMap<String, UserDoc> = [("C".to_string(), doc("C", &["hello there"]))].into();
        let s = length_stats(&[rec("C", &[])], &docs).unwrap();
        assert_eq!(s.control.tokens.stdev, 0.0);
        assert_eq!(s.control.chars.mean, 11.0);
        assert!(length_stats(&[rec("missing", &[])], &docs).is_err());
    }

    #[test]
    fn concomitance_hand_values() {
        let m = concomitance(&[rec("A", &[Depression, Anxiety]), rec("B", &[Depression])]);
        let (d, a) = (Depression.index(), Anxiety.index());
        assert_eq!(m.rows[d][a], 0.5);
        assert_eq!(m.rows[a][d], 1.0);
        for i in 0..9 {
            assert_eq!(m.rows[i][i], 1.0);
        }
        assert_eq!(m.rows[Ocd.index()][d], 0.0);
        let single = concomitance(&[rec("A", &[Ptsd])]);
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(single.rows[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn compensated_sum() {
        let v = vec![1e16, 1.0, -1e16];
        assert_eq!(neumaier(v), 1.0);
    }
}
