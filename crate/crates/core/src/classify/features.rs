use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::UserDoc;
use crate::{Error, Result};

/// Words kept for bag-of-words features.
pub const MIN_TOKEN_COUNT: u64 = 20;

/// Training vocabulary with document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
    min_count: u64,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Tokens with a total training frequency of at least `min_count`,
    /// indexed in lexicographic order.
    pub fn build<D: AsRef<[String]> + Sync>(docs: &[D], min_count: u64) -> Result<Vocab> {
        let (tf, df) = docs
            .par_iter()
            .fold(
                || (HashMap::<&str, u64>::new(), HashMap::<&str, u32>::new()),
                |(mut tf, mut df), doc| {
                    let mut seen: HashMap<&str, ()> = HashMap::new();
                    for t in doc.as_ref() {
                        *tf.entry(t.as_str()).or_default() += 1;
                        if seen.insert(t.as_str(), ()).is_none() {
                            *df.entry(t.as_str()).or_default() += 1;
                        }
                    }
                    (tf, df)
                },
            )
            .reduce(
                || (HashMap::new(), HashMap::new()),
                |(mut tf, mut df), (tf2, df2)| {
                    for (k, v) in tf2 {
                        *tf.entry(k).or_default() += v;
                    }
                    for (k, v) in df2 {
                        *df.entry(k).or_default() += v;
                    }
                    (tf, df)
                },
            );
        let mut kept: Vec<&str> = tf
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(&t, _)| t)
            .collect();
        if kept.is_empty() {
            return Err(Error::insufficient(format!(
                "no token occurs at least {min_count} times in the training documents"
            )));
        }
        kept.sort_unstable();
        let df = kept.iter().map(|t| df[t]).collect();
        Ok(Vocab::from_parts(
            kept.into_iter().map(String::from).collect(),
            df,
            docs.len() as u32,
            min_count,
        ))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, df: Vec<u32>, n_docs: u32, min_count: u64) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens,
            df,
            n_docs,
            min_count,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.df
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, index: u32) -> f64 {
        let n = self.n_docs as f64;
        ((1.0 + n) / (1.0 + self.df[index as usize] as f64)).ln() + 1.0
    }

    /// Raw-count tf-idf, ℓ2-normalized. Unknown tokens are dropped; a
    /// document with no known token maps to the zero vector.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.get(t.as_ref()) {
                *counts.entry(i).or_default() += 1;
            }
        }
        let mut v = SparseVector {
            indices: counts.keys().copied().collect(),
            values: counts.iter().map(|(&i, &c)| c as f64 * self.idf(i)).collect(),
        };
        v.normalize();
        v
    }
}

/// Sorted `(index, weight)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<SparseVector> {
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate index in sparse vector"));
        }
        Ok(SparseVector {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }
}

/// Builds (or reuses) a vocabulary and returns every user's tf-idf vector.
/// Each user's document is the concatenation of their posts.
pub fn build_features(
    docs: &BTreeMap<String, UserDoc>,
    vocab: Option<&Vocab>,
    min_count: u64,
) -> Result<(Vocab, BTreeMap<String, SparseVector>)> {
    let tokens: Vec<(&String, Vec<String>)> = docs.par_iter().map(|(id, d)| (id, d.tokens())).collect();
    let vocab = match vocab {
        Some(v) => v.clone(),
        None => {
            let lists: Vec<&Vec<String>> = tokens.iter().map(|(_, t)| t).collect();
            Vocab::build(&lists, min_count)?
        }
    };
    let vectors = tokens
        .par_iter()
        .map(|(id, t)| ((*id).clone(), vocab.vectorize(t)))
        .collect();
    Ok((vocab, vectors))
}
