//! Text primitives shared by the matchers, the filters and the classifiers.
//!
//! All span arithmetic in this crate is done in Unicode scalar values
//! (`char` offsets), never bytes.

use std::collections::HashMap;

use crate::{Error, Result};

/// Splits `text` into maximal runs of alphanumeric characters, lowercased.
///
/// Alphanumeric is Unicode-aware, so `déjà` stays a single token. Lowercasing
/// is per character, as in [`fold`].
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().map(fold_char).collect())
        .collect()
}

/// Number of tokens [`tokenize`] would return, without allocating.
pub fn token_count(text: &str) -> usize {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .count()
}

/// Length in Unicode scalar values.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Lowercases `text` one character at a time.
///
/// Characters whose lowercase form is longer than a single scalar are kept
/// as-is, so offsets into the folded buffer are offsets into the original.
pub fn fold(text: &str) -> Vec<char> {
    text.chars().map(fold_char).collect()
}

pub(crate) fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

#[inline]
pub(crate) fn boundary_before(text: &[char], at: usize) -> bool {
    at == 0 || !text[at - 1].is_alphanumeric()
}

#[inline]
pub(crate) fn boundary_after(text: &[char], at: usize) -> bool {
    at == text.len() || !text[at].is_alphanumeric()
}

/// Normalizes a phrase from an asset file: lowercase, single spaces, trimmed.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(|w| w.chars().map(fold_char).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Matches the word sequence `words` starting exactly at `pos`.
///
/// Consecutive words must be separated by at least one whitespace character;
/// any run of whitespace is accepted. When `leading_gap` is set a whitespace
/// run is required before the first word too. Returns the end offset.
pub(crate) fn match_words(
    text: &[char],
    mut pos: usize,
    words: &[Vec<char>],
    leading_gap: bool,
) -> Option<usize> {
    for (i, word) in words.iter().enumerate() {
        if i > 0 || leading_gap {
            let ws_start = pos;
            while pos < text.len() && text[pos].is_whitespace() {
                pos += 1;
            }
            if pos == ws_start {
                return None;
            }
        }
        let end = pos + word.len();
        if end > text.len() || text[pos..end] != word[..] {
            return None;
        }
        pos = end;
    }
    Some(pos)
}

pub(crate) fn split_words(phrase: &str) -> Vec<Vec<char>> {
    phrase
        .split_whitespace()
        .map(|w| w.chars().map(fold_char).collect())
        .collect()
}

/// A hit reported by [`PhraseSet::find_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseHit {
    pub start: usize,
    pub end: usize,
    /// Index of the phrase in insertion order.
    pub phrase: usize,
}

/// A compiled set of phrases matched at word boundaries, case-insensitively,
/// with arbitrary whitespace runs between the words of a phrase.
#[derive(Debug, Clone, Default)]
pub struct PhraseSet {
    phrases: Vec<String>,
    words: Vec<Vec<Vec<char>>>,
    by_first: HashMap<char, Vec<usize>>,
}

impl PhraseSet {
    pub fn new<I, S>(phrases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = PhraseSet::default();
        for p in phrases {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    fn push(&mut self, phrase: &str) -> Result<()> {
        let normalized = normalize_phrase(phrase);
        if normalized.is_empty() {
            return Err(Error::invalid("empty phrase"));
        }
        let words = split_words(&normalized);
        let idx = self.phrases.len();
        self.by_first.entry(words[0][0]).or_default().push(idx);
        self.phrases.push(normalized);
        self.words.push(words);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrase(&self, idx: usize) -> &str {
        &self.phrases[idx]
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    /// Every occurrence of every phrase in the folded text, ordered by
    /// `(start, end, phrase)`. Occurrences of different phrases may overlap.
    pub fn find_all(&self, folded: &[char]) -> Vec<PhraseHit> {
        let mut hits = Vec::new();
        self.scan(folded, |hit| {
            hits.push(hit);
            true
        });
        hits.sort_by_key(|h| (h.start, h.end, h.phrase));
        hits
    }

    /// Whether any phrase occurs in the folded text.
    pub fn contains_any(&self, folded: &[char]) -> bool {
        let mut found = false;
        self.scan(folded, |_| {
            found = true;
            false
        });
        found
    }

    /// Convenience wrapper that folds `text` first.
    pub fn matches(&self, text: &str) -> bool {
        !self.is_empty() && self.contains_any(&fold(text))
    }

    fn scan(&self, folded: &[char], mut on_hit: impl FnMut(PhraseHit) -> bool) {
        if self.is_empty() {
            return;
        }
        for start in 0..folded.len() {
            if !boundary_before(folded, start) {
                continue;
            }
            let Some(candidates) = self.by_first.get(&folded[start]) else {
                continue;
            };
            for &idx in candidates {
                if let Some(end) = match_words(folded, start, &self.words[idx], false) {
                    if boundary_after(folded, end)
                        && !on_hit(PhraseHit {
                            start,
                            end,
                            phrase: idx,
                        })
                    {
                        return;
                    }
                }
            }
        }
    }
}
