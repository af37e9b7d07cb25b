use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::Vocab;
use super::sigmoid;
use crate::{Condition, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastTextParams {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    /// Hashed character n-gram rows.
    pub buckets: u32,
    pub epochs: usize,
    /// Initial step size; decays linearly towards zero.
    pub learning_rate: f64,
    /// Minimum training frequency for a whole-word row.
    pub min_count: u64,
}

impl Default for FastTextParams {
    fn default() -> Self {
        FastTextParams {
            dim: 100,
            min_n: 3,
            max_n: 6,
            buckets: 1 << 21,
            epochs: 100,
            learning_rate: 0.1,
            min_count: 1,
        }
    }
}

impl FastTextParams {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.epochs == 0 || self.buckets == 0 {
            return Err(Error::invalid("dim, epochs and buckets must be positive"));
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(Error::invalid("n-gram range must satisfy 1 <= min_n <= max_n"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// 32-bit FNV-1a.
pub fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Character n-grams of `<word>` for every size in `min_n..=max_n`.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        if n > chars.len() {
            break;
        }
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

/// Subword classifier: a document is the mean of its word and hashed
/// character n-gram embeddings, followed by one sigmoid output per label.
#[derive(Debug, Clone, PartialEq)]
pub struct FastTextModel {
    pub params: FastTextParams,
    pub seed: u64,
    pub labels: Vec<Condition>,
    pub(crate) words: Vocab,
    /// Embedding rows touched during training, ascending.
    pub(crate) trained_rows: Vec<u32>,
    /// `trained_rows.len() * dim` values.
    pub(crate) table: Vec<f32>,
    /// `labels.len() * dim` values.
    pub(crate) output: Vec<f32>,
    pub(crate) bias: Vec<f32>,
}

/// Initial value of an embedding row; rows never touched in training keep it.
fn init_row(seed: u64, row: u32, dim: usize, out: &mut [f32]) {
    let mut rng = Pcg64::new(seed as u128, row as u128);
    let bound = 1.0 / dim as f32;
    for v in out.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

fn token_rows(token: &str, words: &Vocab, params: &FastTextParams) -> Vec<u32> {
    let nwords = words.len() as u32;
    let mut rows = Vec::new();
    if let Some(i) = words.get(token) {
        rows.push(i);
    }
    for g in char_ngrams(token, params.min_n, params.max_n) {
        rows.push(nwords + fnv1a32(g.as_bytes()) % params.buckets);
    }
    rows
}

/// Distinct rows of a document with their averaging weights.
fn doc_rows(tokens: &[String], cache: &HashMap<&str, Vec<u32>>) -> Vec<(u32, f32)> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    let mut total = 0u32;
    for t in tokens {
        for &r in &cache[t.as_str()] {
            *counts.entry(r).or_default() += 1;
            total += 1;
        }
    }
    let mut rows: Vec<(u32, f32)> = counts
        .into_iter()
        .map(|(r, c)| (r, c as f32 / total as f32))
        .collect();
    rows.sort_unstable_by_key(|p| p.0);
    rows
}

fn row_cache<'a>(docs: &'a [Vec<String>], words: &Vocab, params: &FastTextParams) -> HashMap<&'a str, Vec<u32>> {
    let unique: BTreeSet<&str> = docs.iter().flatten().map(String::as_str).collect();
    unique
        .into_par_iter()
        .map(|t| (t, token_rows(t, words, params)))
        .collect()
}

/// Trains a one-vs-all model over `label_set`. Every label needs at least one
/// positive example.
pub fn train_fasttext(
    docs: &[Vec<String>],
    labels: &[BTreeSet<Condition>],
    label_set: &[Condition],
    params: FastTextParams,
    seed: u64,
) -> Result<FastTextModel> {
    params.validate()?;
    if docs.len() != labels.len() {
        return Err(Error::invalid("documents and labels differ in length"));
    }
    if label_set.is_empty() {
        return Err(Error::invalid("no labels to train"));
    }
    for c in label_set {
        if !labels.iter().any(|l| l.contains(c)) {
            return Err(Error::insufficient(format!("label {c} has no training examples")));
        }
    }
    let words = Vocab::build(docs, params.min_count)?;
    let cache = row_cache(docs, &words, &params);
    let raw: Vec<Vec<(u32, f32)>> = docs.par_iter().map(|d| doc_rows(d, &cache)).collect();

    let trained_rows: Vec<u32> = raw
        .iter()
        .flatten()
        .map(|p| p.0)
        .collect::<BTreeSet<u32>>()
        .into_iter()
        .collect();
    let compact: HashMap<u32, u32> = trained_rows
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i as u32))
        .collect();
    let inputs: Vec<Vec<(u32, f32)>> = raw
        .into_iter()
        .map(|d| d.into_iter().map(|(r, w)| (compact[&r], w)).collect())
        .collect();
    let targets: Vec<Vec<f32>> = labels
        .iter()
        .map(|l| label_set.iter().map(|c| if l.contains(c) { 1.0 } else { 0.0 }).collect())
        .collect();

    let dim = params.dim;
    let mut table = vec![0.0f32; trained_rows.len() * dim];
    table
        .par_chunks_mut(dim)
        .zip(trained_rows.par_iter())
        .for_each(|(chunk, &row)| init_row(seed, row, dim, chunk));
    let mut output = vec![0.0f32; label_set.len() * dim];
    let mut bias = vec![0.0f32; label_set.len()];

    let mut rng = Pcg64::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let total_steps = (params.epochs * docs.len()) as f64;
    let mut step = 0usize;
    let mut hidden = vec![0.0f32; dim];
    let mut grad = vec![0.0f32; dim];

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let lr = (params.learning_rate * (1.0 - step as f64 / total_steps)) as f32;
            step += 1;
            let input = &inputs[i];
            if input.is_empty() {
                continue;
            }
            hidden.fill(0.0);
            for &(r, w) in input {
                let row = &table[r as usize * dim..(r as usize + 1) * dim];
                for (h, e) in hidden.iter_mut().zip(row) {
                    *h += w * e;
                }
            }
            grad.fill(0.0);
            for (l, &y) in targets[i].iter().enumerate() {
                let o = &mut output[l * dim..(l + 1) * dim];
                let z: f32 = o.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f32>() + bias[l];
                let g = sigmoid(z as f64) as f32 - y;
                for ((gr, ov), h) in grad.iter_mut().zip(o.iter_mut()).zip(&hidden) {
                    *gr += g * *ov;
                    *ov -= lr * g * h;
                }
                bias[l] -= lr * g;
            }
            for &(r, w) in input {
                let row = &mut table[r as usize * dim..(r as usize + 1) * dim];
                let s = lr * w;
                for (e, g) in row.iter_mut().zip(&grad) {
                    *e -= s * g;
                }
            }
        }
    }

    Ok(FastTextModel {
        params,
        seed,
        labels: label_set.to_vec(),
        words,
        trained_rows,
        table,
        output,
        bias,
    })
}

impl FastTextModel {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    fn add_row(&self, row: u32, weight: f32, acc: &mut [f32], scratch: &mut [f32]) {
        let dim = self.params.dim;
        let values = match self.trained_rows.binary_search(&row) {
            Ok(i) => &self.table[i * dim..(i + 1) * dim],
            Err(_) => {
                init_row(self.seed, row, dim, scratch);
                &*scratch
            }
        };
        for (a, v) in acc.iter_mut().zip(values) {
            *a += weight * v;
        }
    }

    fn embed_rows(&self, rows: &[(u32, f32)]) -> Vec<f32> {
        let mut acc = vec![0.0f32; self.params.dim];
        let mut scratch = vec![0.0f32; self.params.dim];
        for &(r, w) in rows {
            self.add_row(r, w, &mut acc, &mut scratch);
        }
        acc
    }

    /// Mean of a word's own row (if known) and its n-gram rows.
    pub fn word_vector(&self, word: &str) -> Vec<f32> {
        let rows = token_rows(word, &self.words, &self.params);
        let w = 1.0 / rows.len().max(1) as f32;
        let weighted: Vec<(u32, f32)> = rows.into_iter().map(|r| (r, w)).collect();
        self.embed_rows(&weighted)
    }

    /// Document embedding.
    pub fn embed(&self, tokens: &[String]) -> Vec<f32> {
        let cache: HashMap<&str, Vec<u32>> = tokens
            .iter()
            .map(|t| (t.as_str(), token_rows(t, &self.words, &self.params)))
            .collect();
        self.embed_rows(&doc_rows(tokens, &cache))
    }

    /// Sigmoid score per label, in [`FastTextModel::labels`] order.
    pub fn predict(&self, tokens: &[String]) -> Vec<f64> {
        let h = self.embed(tokens);
        let dim = self.params.dim;
        (0..self.labels.len())
            .map(|l| {
                let o = &self.output[l * dim..(l + 1) * dim];
                let z: f32 = o.iter().zip(&h).map(|(a, b)| a * b).sum::<f32>() + self.bias[l];
                sigmoid(z as f64)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small() -> FastTextParams {
        FastTextParams {
            dim: 16,
            buckets: 1 << 12,
            epochs: 30,
            ..Default::default()
        }
    }

    #[test]
    fn ngram_extraction() {
        let g = char_ngrams("abc", 3, 6);
        assert_eq!(g, vec!["<ab", "abc", "bc>", "<abc", "abc>", "<abc>"]);
        assert!(char_ngrams("", 3, 6).is_empty());
        assert_eq!(fnv1a32(b""), 0x811c9dc5);
        assert_eq!(fnv1a32(b"a"), 0xe40c292c);
        assert_eq!(fnv1a32(b"foobar"), 0xbf9cf968);
    }

    fn toy() -> (Vec<Vec<String>>, Vec<BTreeSet<Condition>>) {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            if i % 2 == 0 {
                docs.push(toks("sadness gloom depressed weary tired"));
                labels.push([Condition::Depression].into());
            } else {
                docs.push(toks("garden picnic sunny bicycle"));
                labels.push(BTreeSet::new());
            }
        }
        (docs, labels)
    }

    #[test]
    fn separable_binary_task() {
        let (docs, labels) = toy();
        let m = train_fasttext(&docs, &labels, &[Condition::Depression], small(), 4).unwrap();
        for (d, l) in docs.iter().zip(&labels) {
            assert_eq!(m.predict(d)[0] >= 0.5, !l.is_empty());
        }
    }

    #[test]
    fn subword_fallback() {
        let (docs, labels) = toy();
        let m = train_fasttext(&docs, &labels, &[Condition::Depression], small(), 4).unwrap();
        let a = m.word_vector("depressed");
        let b = m.word_vector("depressing");
        assert!(b.iter().any(|&v| v != 0.0));
        let dot: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!(dot / (na * nb) > 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let (docs, labels) = toy();
        let a = train_fasttext(&docs, &labels, &[Condition::Depression], small(), 11).unwrap();
        let b = train_fasttext(&docs, &labels, &[Condition::Depression], small(), 11).unwrap();
        assert_eq!(a, b);
        let c = train_fasttext(&docs, &labels, &[Condition::Depression], small(), 12).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn label_without_examples_is_named() {
        let (docs, labels) = toy();
        let err = train_fasttext(&docs, &labels, &[Condition::Depression, Condition::Ocd], small(), 1)
            .unwrap_err()
            .to_string();
        assert!(err.contains("ocd"), "{err}");
        let bad = FastTextParams { min_n: 4, max_n: 3, ..small() };
        assert!(train_fasttext(&docs, &labels, &[Condition::Depression], bad, 1).is_err());
    }
}
