use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{find_triggers_folded, PatternSet, Polarity, Trigger};
use crate::text::{self, PhraseHit, PhraseSet};
use crate::{Condition, Error, Result};

/// Keywords naming one condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionLexicon {
    pub condition: Condition,
    pub keywords: Vec<String>,
}

/// Condition lexicons compiled into a single phrase matcher.
#[derive(Debug, Clone)]
pub struct Lexicons {
    entries: BTreeMap<Condition, ConditionLexicon>,
    matcher: PhraseSet,
    phrase_condition: Vec<Condition>,
}

impl Lexicons {
    /// Validates and compiles lexicons. Keywords must be non-empty, unique
    /// within their condition and lowercase; each condition may appear once.
    pub fn new(lexicons: Vec<ConditionLexicon>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for lex in lexicons {
            let name = format!("lexicon[{}]", lex.condition);
            if lex.keywords.is_empty() {
                return Err(Error::asset(name, "no keywords"));
            }
            let mut seen = BTreeSet::new();
            for kw in &lex.keywords {
                let norm = text::normalize_phrase(kw);
                if norm.is_empty() {
                    return Err(Error::asset(name, "empty keyword"));
                }
                if kw.trim() != kw.trim().to_lowercase() {
                    return Err(Error::asset(name, format!("keyword `{kw}` is not lowercase")));
                }
                if !seen.insert(norm) {
                    return Err(Error::asset(name, format!("duplicate keyword `{kw}`")));
                }
            }
            if entries.insert(lex.condition, lex).is_some() {
                return Err(Error::asset(name, "condition listed twice"));
            }
        }
        if entries.is_empty() {
            return Err(Error::asset("lexicon", "no conditions"));
        }
        let mut phrases = Vec::new();
        let mut phrase_condition = Vec::new();
        for lex in entries.values() {
            for kw in &lex.keywords {
                phrases.push(kw.as_str());
                phrase_condition.push(lex.condition);
            }
        }
        Ok(Lexicons {
            matcher: PhraseSet::new(phrases)?,
            phrase_condition,
            entries,
        })
    }

    /// Parses the JSON lexicon format:
    /// `[{"condition": "adhd", "keywords": ["adhd", ...]}, ...]`.
    pub fn from_json(json: &str) -> Result<Self> {
        let parsed: Vec<ConditionLexicon> =
            serde_json::from_str(json).map_err(|e| Error::asset("lexicon", e.to_string()))?;
        Lexicons::new(parsed)
    }

    pub fn conditions(&self) -> impl Iterator<Item = Condition> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, condition: Condition) -> Option<&ConditionLexicon> {
        self.entries.get(&condition)
    }

    /// Every keyword occurrence in a folded text, with its condition.
    pub(crate) fn keyword_hits(&self, folded: &[char]) -> Vec<(PhraseHit, Condition)> {
        self.matcher
            .find_all(folded)
            .into_iter()
            .map(|h| (h, self.phrase_condition[h.phrase]))
            .collect()
    }

    pub(crate) fn keyword(&self, hit: &PhraseHit) -> &str {
        self.matcher.phrase(hit.phrase)
    }
}

/// A positive trigger with a nearby condition keyword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisMatch {
    pub post_id: String,
    pub trigger_span: (usize, usize),
    pub condition: Condition,
    pub keyword: String,
    pub keyword_span: (usize, usize),
    /// Characters strictly between the nearer boundaries of the two spans.
    pub gap_chars: usize,
    pub polarity: Polarity,
}

fn gap(trigger: &Trigger, hit: &PhraseHit) -> Option<usize> {
    if hit.start >= trigger.end {
        Some(hit.start - trigger.end)
    } else if hit.end <= trigger.start {
        Some(trigger.start - hit.end)
    } else {
        None
    }
}

/// Nearest keyword per (positive trigger, condition), with no distance limit.
pub(crate) fn nearest_keywords(
    post_id: &str,
    folded: &[char],
    set: &PatternSet,
    lexicons: &Lexicons,
) -> Vec<DiagnosisMatch> {
    let triggers = find_triggers_folded(folded, set);
    keywords_near_triggers(post_id, folded, &triggers, lexicons)
}

/// Nearest keyword per (positive trigger, condition) for already-selected
/// triggers; negative triggers are skipped.
pub(crate) fn keywords_near_triggers(
    post_id: &str,
    folded: &[char],
    triggers: &[Trigger],
    lexicons: &Lexicons,
) -> Vec<DiagnosisMatch> {
    let triggers: Vec<&Trigger> = triggers
        .iter()
        .filter(|t| t.polarity == Polarity::Positive)
        .collect();
    if triggers.is_empty() {
        return Vec::new();
    }
    let hits = lexicons.keyword_hits(folded);
    let mut out = Vec::new();
    for trigger in triggers {
        let mut best: BTreeMap<Condition, (usize, &PhraseHit)> = BTreeMap::new();
        for (hit, condition) in &hits {
            let Some(g) = gap(trigger, hit) else { continue };
            let better = match best.get(condition) {
                None => true,
                Some((bg, bh)) => (g, hit.start, hit.end) < (*bg, bh.start, bh.end),
            };
            if better {
                best.insert(*condition, (g, hit));
            }
        }
        for (condition, (g, hit)) in best {
            out.push(DiagnosisMatch {
                post_id: post_id.to_string(),
                trigger_span: (trigger.start, trigger.end),
                condition,
                keyword: lexicons.keyword(hit).to_string(),
                keyword_span: (hit.start, hit.end),
                gap_chars: g,
                polarity: Polarity::Positive,
            });
        }
    }
    out
}

/// Condition matches for one post: for every positive trigger and every
/// condition, the nearest keyword occurrence (either side, ties to the
/// earlier span) if its gap is at most `max_dist` characters.
///
/// Output is ordered by trigger position, then condition.
pub fn match_conditions(
    post_id: &str,
    text: &str,
    set: &PatternSet,
    lexicons: &Lexicons,
    max_dist: usize,
) -> Vec<DiagnosisMatch> {
    let folded = text::fold(text);
    let mut matches = nearest_keywords(post_id, &folded, set, lexicons);
    matches.retain(|m| m.gap_chars <= max_dist);
    matches
}
