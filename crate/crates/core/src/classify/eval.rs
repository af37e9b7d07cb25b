use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};

use crate::metrics::{fbeta, Counts};
use crate::{Condition, Error, Result};

pub type LabelSets = BTreeMap<String, BTreeSet<Condition>>;

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user_id: String,
    pub scores: BTreeMap<Condition, f64>,
}

/// Labels whose score is at least `threshold`.
pub fn apply_threshold(predictions: &[Prediction], threshold: f64) -> LabelSets {
    predictions
        .iter()
        .map(|p| {
            let labels = p
                .scores
                .iter()
                .filter(|(_, &s)| s >= threshold)
                .map(|(&c, _)| c)
                .collect();
            (p.user_id.clone(), labels)
        })
        .collect()
}

pub fn write_predictions<W: io::Write>(mut out: W, predictions: &[Prediction]) -> io::Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::asset("predictions", format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when nothing was predicted positive.
    pub precision_undefined: bool,
    /// Set when the gold standard has no positive.
    pub recall_undefined: bool,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Prf {
        let (p, r) = (c.precision(), c.recall());
        Prf {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * fbeta(p, r, 1.0).expect("ratios lie in [0, 1]"),
            precision_undefined: c.tp + c.fp == 0,
            recall_undefined: c.tp + c.fn_ == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Binary diagnosed-versus-control scores per condition.
    pub per_condition: BTreeMap<Condition, Prf>,
    /// Micro-averaged over every (user, condition) pair.
    pub multi_label: Prf,
}

/// Scores predicted label sets against gold sets.
///
/// `binary_subsets` names, per condition, the users its binary score is
/// computed over. Both label maps must cover the same users.
pub fn evaluate(
    predicted: &LabelSets,
    gold: &LabelSets,
    binary_subsets: &BTreeMap<Condition, BTreeSet<String>>,
) -> Result<EvalReport> {
    if predicted.len() != gold.len() || predicted.keys().zip(gold.keys()).any(|(a, b)| a != b) {
        let missing = gold.keys().find(|k| !predicted.contains_key(*k));
        let extra = predicted.keys().find(|k| !gold.contains_key(*k));
        return Err(Error::invalid(format!(
            "prediction and gold users differ (first missing: {missing:?}, first extra: {extra:?})"
        )));
    }
    let mut per_condition = BTreeMap::new();
    for (&c, users) in binary_subsets {
        let mut counts = Counts::default();
        for u in users {
            let g = gold
                .get(u)
                .ok_or_else(|| Error::invalid(format!("user {u} in the {c} subset has no gold labels")))?
                .contains(&c);
            let p = predicted[u].contains(&c);
            counts.record(p, g);
        }
        per_condition.insert(c, Prf::from_counts(counts));
    }
    let mut micro = Counts::default();
    for (u, g) in gold {
        let p = &predicted[u];
        for c in Condition::ALL {
            micro.record(p.contains(&c), g.contains(&c));
        }
    }
    Ok(EvalReport {
        per_condition,
        multi_label: Prf::from_counts(micro),
    })
}
