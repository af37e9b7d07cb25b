//! Bag-of-words and subword baselines for diagnosed-versus-control
//! classification.

mod eval;
mod fasttext;
mod features;
mod linear;
mod modelio;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use eval::{apply_threshold, evaluate, read_predictions, write_predictions, EvalReport, LabelSets, Prediction, Prf};
pub use fasttext::{char_ngrams, fnv1a32, train_fasttext, FastTextModel, FastTextParams};
pub use features::{build_features, SparseVector, Vocab, MIN_TOKEN_COUNT};
pub use linear::{gradient, objective, train_linear, LinearHyper, LinearModel, LossKind};
pub use modelio::{read_model, write_model, FORMAT_VERSION, MAGIC};

use crate::cohort::{CohortRecord, Role, Split};
use crate::corpus::UserDoc;
use crate::{Condition, Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Svm,
    Fasttext,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Fasttext => "fasttext",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "svm" => Ok(ModelKind::Svm),
            "fasttext" => Ok(ModelKind::Fasttext),
            _ => Err(Error::invalid(format!("unknown model kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// One diagnosed-versus-matched-control model per condition.
    Binary,
    /// Every training user, every condition.
    Multilabel,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multilabel => "multilabel",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multilabel" => Ok(Task::Multilabel),
            _ => Err(Error::invalid(format!("unknown task `{s}`"))),
        }
    }
}

fn in_split(r: &CohortRecord, split: Option<Split>) -> bool {
    split.map_or(true, |s| r.split == s)
}

/// Binary examples for `condition`: diagnosed users with it (positive) and
/// the controls matched to them (negative), in cohort order.
pub fn binary_examples(records: &[CohortRecord], condition: Condition, split: Option<Split>) -> Vec<(String, bool)> {
    let positives: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.role == Role::Diagnosed && in_split(r, split) && r.conditions.contains(&condition))
        .map(|r| r.user_id.as_str())
        .collect();
    records
        .iter()
        .filter(|r| in_split(r, split))
        .filter_map(|r| match r.role {
            Role::Diagnosed if positives.contains(r.user_id.as_str()) => Some((r.user_id.clone(), true)),
            Role::Control if r.matched_to.as_deref().is_some_and(|d| positives.contains(d)) => {
                Some((r.user_id.clone(), false))
            }
            _ => None,
        })
        .collect()
}

/// Per-condition user subsets for binary evaluation, for every condition
/// with at least one diagnosed user in the split.
pub fn binary_subsets(records: &[CohortRecord], split: Option<Split>) -> BTreeMap<Condition, BTreeSet<String>> {
    Condition::ALL
        .into_iter()
        .filter_map(|c| {
            let users: BTreeSet<String> = binary_examples(records, c, split).into_iter().map(|e| e.0).collect();
            (!users.is_empty()).then_some((c, users))
        })
        .collect()
}

/// Gold condition sets of every user in the split; controls have none.
pub fn gold_labels(records: &[CohortRecord], split: Option<Split>) -> LabelSets {
    records
        .iter()
        .filter(|r| in_split(r, split))
        .map(|r| (r.user_id.clone(), r.conditions.iter().copied().collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub task: Task,
    /// Restricts training to these conditions; all trainable ones otherwise.
    pub conditions: Option<Vec<Condition>>,
    pub linear: LinearHyper,
    pub fasttext: FastTextParams,
    pub min_token_count: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Logreg,
            task: Task::Binary,
            conditions: None,
            linear: LinearHyper::default(),
            fasttext: FastTextParams::default(),
            min_token_count: MIN_TOKEN_COUNT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Body {
    /// One model per label over a shared vocabulary.
    Linear { vocab: Vocab, models: Vec<LinearModel> },
    /// Each model carries its own labels.
    FastText(Vec<FastTextModel>),
}

/// A trained classifier over one or more conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub kind: ModelKind,
    pub task: Task,
    pub labels: Vec<Condition>,
    pub(crate) body: Body,
}

fn tokens_of<'a>(docs: &'a BTreeMap<String, UserDoc>, id: &str) -> Result<&'a UserDoc> {
    docs.get(id)
        .ok_or_else(|| Error::insufficient(format!("no posts for cohort member {id}")))
}

/// Labelled examples per trained condition.
type Examples = Vec<(Condition, Vec<(String, bool)>)>;

fn training_examples(records: &[CohortRecord], cfg: &TrainConfig) -> Result<Examples> {
    let wanted: Vec<Condition> = cfg.conditions.clone().unwrap_or_else(|| Condition::ALL.to_vec());
    let explicit = cfg.conditions.is_some();
    let mut out = Vec::new();
    let all_train: Vec<&CohortRecord> = records.iter().filter(|r| r.split == Split::Train).collect();
    for c in wanted {
        let examples = match cfg.task {
            Task::Binary => binary_examples(records, c, Some(Split::Train)),
            Task::Multilabel => all_train
                .iter()
                .map(|r| (r.user_id.clone(), r.conditions.contains(&c)))
                .collect(),
        };
        let pos = examples.iter().filter(|e| e.1).count();
        if pos == 0 || pos == examples.len() {
            if explicit {
                return Err(Error::insufficient(format!("condition {c} lacks training examples of both classes")));
            }
            if pos > 0 || cfg.task == Task::Binary {
                warn!("condition {c}: not trainable on this split, skipped");
            }
            continue;
        }
        out.push((c, examples));
    }
    if out.is_empty() {
        return Err(Error::insufficient("no condition has training examples of both classes"));
    }
    Ok(out)
}

fn condition_seed(seed: u64, c: Condition) -> u64 {
    seed.wrapping_add(c.index() as u64)
}

/// Trains on the `train` split of a cohort. `docs` should hold scrubbed
/// documents for every cohort member.
pub fn train(records: &[CohortRecord], docs: &BTreeMap<String, UserDoc>, cfg: &TrainConfig) -> Result<Classifier> {
    let examples = training_examples(records, cfg)?;
    let labels: Vec<Condition> = examples.iter().map(|e| e.0).collect();
    let users: BTreeSet<&str> = examples.iter().flat_map(|e| e.1.iter().map(|x| x.0.as_str())).collect();
    let tokens: BTreeMap<&str, Vec<String>> = users
        .par_iter()
        .map(|&u| tokens_of(docs, u).map(|d| (u, d.tokens())))
        .collect::<Result<_>>()?;
    info!("training {} {} model(s) on {} users", labels.len(), cfg.kind, users.len());

    let body = match cfg.kind {
        ModelKind::Logreg | ModelKind::Svm => {
            let loss = if cfg.kind == ModelKind::Logreg { LossKind::Logistic } else { LossKind::Hinge };
            let lists: Vec<&Vec<String>> = tokens.values().collect();
            let vocab = Vocab::build(&lists, cfg.min_token_count)?;
            let vectors: BTreeMap<&str, SparseVector> =
                tokens.par_iter().map(|(&u, t)| (u, vocab.vectorize(t))).collect();
            let models = examples
                .par_iter()
                .map(|(c, ex)| {
                    let xs: Vec<SparseVector> = ex.iter().map(|e| vectors[e.0.as_str()].clone()).collect();
                    let ys: Vec<bool> = ex.iter().map(|e| e.1).collect();
                    train_linear(&xs, &ys, vocab.len(), loss, cfg.linear, condition_seed(cfg.seed, *c))
                })
                .collect::<Result<Vec<_>>>()?;
            Body::Linear { vocab, models }
        }
        ModelKind::Fasttext => {
            let fit = |ex: &[(String, bool)], label_set: &[Condition], label_of: &dyn Fn(&str) -> BTreeSet<Condition>, seed| {
                let ds: Vec<Vec<String>> = ex.iter().map(|e| tokens[e.0.as_str()].clone()).collect();
                let ls: Vec<BTreeSet<Condition>> = ex.iter().map(|e| label_of(&e.0)).collect();
                train_fasttext(&ds, &ls, label_set, cfg.fasttext, seed)
            };
            match cfg.task {
                Task::Binary => {
                    let models = examples
                        .par_iter()
                        .map(|(c, ex)| {
                            let positive: BTreeSet<&str> =
                                ex.iter().filter(|e| e.1).map(|e| e.0.as_str()).collect();
                            let label_of = |u: &str| {
                                if positive.contains(u) {
                                    BTreeSet::from([*c])
                                } else {
                                    BTreeSet::new()
                                }
                            };
                            fit(ex, &[*c], &label_of, condition_seed(cfg.seed, *c))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Body::FastText(models)
                }
                Task::Multilabel => {
                    let gold: BTreeMap<&str, BTreeSet<Condition>> = records
                        .iter()
                        .map(|r| {
                            let cs = r.conditions.iter().copied().filter(|c| labels.contains(c)).collect();
                            (r.user_id.as_str(), cs)
                        })
                        .collect();
                    let label_of = |u: &str| gold.get(u).cloned().unwrap_or_default();
                    Body::FastText(vec![fit(&examples[0].1, &labels, &label_of, cfg.seed)?])
                }
            }
        }
    };
    Ok(Classifier {
        kind: cfg.kind,
        task: cfg.task,
        labels,
        body,
    })
}

impl Classifier {
    /// Scores for every label, per user, in user-id order.
    pub fn predict(&self, docs: &BTreeMap<String, UserDoc>, users: &BTreeSet<String>) -> Result<Vec<Prediction>> {
        users
            .par_iter()
            .map(|u| {
                let tokens = tokens_of(docs, u)?.tokens();
                Ok(Prediction {
                    user_id: u.clone(),
                    scores: self.score_tokens(&tokens),
                })
            })
            .collect()
    }

    pub fn score_tokens(&self, tokens: &[String]) -> BTreeMap<Condition, f64> {
        match &self.body {
            Body::Linear { vocab, models } => {
                let x = vocab.vectorize(tokens);
                self.labels.iter().zip(models).map(|(&c, m)| (c, m.score(&x))).collect()
            }
            Body::FastText(models) => models
                .iter()
                .flat_map(|m| m.labels.iter().copied().zip(m.predict(tokens)).collect::<Vec<_>>())
                .collect(),
        }
    }

    /// Vocabulary size of the bag-of-words body, if any.
    pub fn vocab_len(&self) -> Option<usize> {
        match &self.body {
            Body::Linear { vocab, .. } => Some(vocab.len()),
            Body::FastText(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Dataset;

    fn rec(id: &str, conds: &[Condition], matched: Option<&str>, split: Split) -> CohortRecord {
        CohortRecord {
            user_id: id.into(),
            role: if matched.is_some() { Role::Control } else { Role::Diagnosed },
            conditions: conds.to_vec(),
            matched_to: matched.map(String::from),
            dataset: Dataset::Smhd,
            split,
        }
    }

    #[test]
    fn binary_examples_use_matched_controls() {
        let records = vec![
            rec("d1", &[Condition::Depression], None, Split::Train),
            rec("c1", &[], Some("d1"), Split::Train),
            rec("d2", &[Condition::Adhd], None, Split::Train),
            rec("c2", &[], Some("d2"), Split::Train),
            rec("d3", &[Condition::Depression], None, Split::Test),
            rec("c3", &[], Some("d3"), Split::Test),
        ];
        let ex = binary_examples(&records, Condition::Depression, Some(Split::Train));
        assert_eq!(ex, vec![("d1".to_string(), true), ("c1".to_string(), false)]);
        let subsets = binary_subsets(&records, Some(Split::Test));
        assert_eq!(subsets.len(), 1);
        assert_eq!(subsets[&Condition::Depression].len(), 2);
        let gold = gold_labels(&records, None);
        assert_eq!(gold.len(), 6);
        assert!(gold["c1"].is_empty());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kind_and_task_names() {
        for k in [ModelKind::Logreg, ModelKind::Svm, ModelKind::Fasttext] {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("multilabel".parse::<Task>().unwrap(), Task::Multilabel);
        assert!("xgboost".parse::<ModelKind>().is_err());
    }
}
