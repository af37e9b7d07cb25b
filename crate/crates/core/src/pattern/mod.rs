//! Diagnosis trigger patterns and condition keyword proximity matching.
//!
//! A diagnosis is detected in two steps. A trigger pattern finds the
//! self-report phrasing ("i was diagnosed with"), and a condition keyword
//! ("adhd") must occur within a character window of that trigger, on either
//! side.
//!
//! Pattern files hold one template per line. A template is a sequence of
//! literal words, alternation groups `(a|b c)` and optional groups `(a|b)?`.
//! Lines starting with `!` are negative patterns; lines starting with `#` are
//! comments.

mod lexicon;
mod tuning;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{self, boundary_after, boundary_before, match_words};

pub use lexicon::{match_conditions, ConditionLexicon, DiagnosisMatch, Lexicons};
pub(crate) use lexicon::keywords_near_triggers;
pub use tuning::{
    evaluate_precision, tune_distance, write_curve_tsv, DevPost, PrCurvePoint, PrecisionReport,
    Tuning,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// One element of a template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateToken {
    Word(String),
    /// Each branch is a sequence of words.
    Group {
        branches: Vec<Vec<String>>,
        optional: bool,
    },
}

/// A parsed trigger template.
#[derive(Debug, Clone)]
pub struct DiagnosisPattern {
    source: String,
    line: usize,
    polarity: Polarity,
    tokens: Vec<TemplateToken>,
    slots: Vec<Slot>,
    first_chars: Vec<char>,
}

/// Alternatives for one template position, each a folded word sequence.
#[derive(Debug, Clone)]
struct Slot {
    alternatives: Vec<Vec<Vec<char>>>,
    optional: bool,
}

impl DiagnosisPattern {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// 1-based line in the pattern file.
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn tokens(&self) -> &[TemplateToken] {
        &self.tokens
    }

    fn new(source: String, line: usize, polarity: Polarity, tokens: Vec<TemplateToken>) -> Self {
        let slots: Vec<Slot> = tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Word(w) => Slot {
                    alternatives: vec![text::split_words(w)],
                    optional: false,
                },
                TemplateToken::Group { branches, optional } => Slot {
                    alternatives: branches
                        .iter()
                        .map(|b| text::split_words(&b.join(" ")))
                        .collect(),
                    optional: *optional,
                },
            })
            .collect();
        let mut first_chars = Vec::new();
        for slot in &slots {
            for alt in &slot.alternatives {
                if !first_chars.contains(&alt[0][0]) {
                    first_chars.push(alt[0][0]);
                }
            }
            if !slot.optional {
                break;
            }
        }
        DiagnosisPattern {
            source,
            line,
            polarity,
            tokens,
            slots,
            first_chars,
        }
    }

    /// Longest match starting exactly at `start`, if any.
    fn longest_match(&self, text: &[char], start: usize) -> Option<usize> {
        let mut best = None;
        self.extend(text, 0, start, true, &mut best);
        best
    }

    fn extend(&self, text: &[char], slot: usize, pos: usize, first: bool, best: &mut Option<usize>) {
        if slot == self.slots.len() {
            if !first && boundary_after(text, pos) && best.map_or(true, |b| pos > b) {
                *best = Some(pos);
            }
            return;
        }
        let s = &self.slots[slot];
        for alt in &s.alternatives {
            if let Some(end) = match_words(text, pos, alt, !first) {
                self.extend(text, slot + 1, end, false, best);
            }
        }
        if s.optional {
            self.extend(text, slot + 1, pos, first, best);
        }
    }
}

/// Compiled positive and negative trigger patterns.
#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<DiagnosisPattern>,
    by_first: HashMap<char, Vec<usize>>,
}

impl PatternSet {
    pub fn positives(&self) -> impl Iterator<Item = &DiagnosisPattern> {
        self.patterns.iter().filter(|p| p.polarity == Polarity::Positive)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &DiagnosisPattern> {
        self.patterns.iter().filter(|p| p.polarity == Polarity::Negative)
    }

    /// All patterns in file order.
    pub fn patterns(&self) -> &[DiagnosisPattern] {
        &self.patterns
    }
}

/// One syntax problem in a pattern file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based; 0 for file-level problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every offending line of a pattern file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct CompileError {
    pub errors: Vec<LineError>,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.errors.iter().map(ToString::to_string).collect();
        write!(f, "pattern syntax: {}", parts.join("; "))
    }
}

fn parse_template(body: &str) -> Result<Vec<TemplateToken>, String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut chars = body.chars().peekable();

    fn flush(word: &mut String, tokens: &mut Vec<TemplateToken>) {
        if !word.is_empty() {
            tokens.push(TemplateToken::Word(std::mem::take(word)));
        }
    }

    while let Some(c) = chars.next() {
        match c {
            '(' => {
                flush(&mut word, &mut tokens);
                let mut branches = Vec::new();
                let mut current = String::new();
                let mut closed = false;
                for g in chars.by_ref() {
                    match g {
                        '(' => return Err("nested groups are not supported".into()),
                        '|' => branches.push(std::mem::take(&mut current)),
                        ')' => {
                            branches.push(std::mem::take(&mut current));
                            closed = true;
                            break;
                        }
                        other => current.push(other),
                    }
                }
                if !closed {
                    return Err("unbalanced parentheses: missing `)`".into());
                }
                let branches: Vec<Vec<String>> = branches
                    .iter()
                    .map(|b| b.split_whitespace().map(|w| w.to_lowercase()).collect())
                    .collect();
                if branches.iter().any(Vec::is_empty) {
                    return Err("empty alternation branch".into());
                }
                let optional = chars.peek() == Some(&'?');
                if optional {
                    chars.next();
                }
                tokens.push(TemplateToken::Group { branches, optional });
            }
            ')' => return Err("unbalanced parentheses: unexpected `)`".into()),
            '|' => return Err("`|` outside of a group".into()),
            '?' => return Err("`?` must follow a group".into()),
            c if c.is_whitespace() => flush(&mut word, &mut tokens),
            c => word.extend(c.to_lowercase()),
        }
    }
    flush(&mut word, &mut tokens);

    if tokens.is_empty() {
        return Err("empty template".into());
    }
    let all_optional = tokens
        .iter()
        .all(|t| matches!(t, TemplateToken::Group { optional: true, .. }));
    if all_optional {
        return Err("template can match empty text".into());
    }
    Ok(tokens)
}

/// Parses a pattern file. All syntax errors are collected before failing.
pub fn compile_patterns(source: &str) -> Result<PatternSet, CompileError> {
    let mut patterns = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (polarity, body) = match line.strip_prefix('!') {
            Some(rest) => (Polarity::Negative, rest.trim()),
            None => (Polarity::Positive, line),
        };
        match parse_template(body) {
            Ok(tokens) => patterns.push(DiagnosisPattern::new(line.to_string(), i + 1, polarity, tokens)),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    if errors.is_empty() && !patterns.iter().any(|p| p.polarity == Polarity::Positive) {
        errors.push(LineError {
            line: 0,
            message: "no positive patterns".into(),
        });
    }
    if !errors.is_empty() {
        return Err(CompileError { errors });
    }
    let mut by_first: HashMap<char, Vec<usize>> = HashMap::new();
    for (idx, p) in patterns.iter().enumerate() {
        for &c in &p.first_chars {
            by_first.entry(c).or_default().push(idx);
        }
    }
    Ok(PatternSet { patterns, by_first })
}

/// A selected trigger occurrence, in character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
    /// Index into [`PatternSet::patterns`].
    pub pattern: usize,
}

/// Candidate matches (longest per pattern and start) before overlap resolution.
fn candidate_triggers(folded: &[char], set: &PatternSet) -> Vec<Trigger> {
    let mut out = Vec::new();
    for start in 0..folded.len() {
        if !boundary_before(folded, start) {
            continue;
        }
        let Some(pats) = set.by_first.get(&folded[start]) else {
            continue;
        };
        for &idx in pats {
            let pattern = &set.patterns[idx];
            if let Some(end) = pattern.longest_match(folded, start) {
                out.push(Trigger {
                    start,
                    end,
                    polarity: pattern.polarity,
                    pattern: idx,
                });
            }
        }
    }
    out
}

/// Resolves overlaps: leftmost first, then longest, then negative before
/// positive, then file order.
pub(crate) fn select_non_overlapping(mut candidates: Vec<Trigger>) -> Vec<Trigger> {
    candidates.sort_by_key(|t| {
        (
            t.start,
            std::cmp::Reverse(t.end),
            t.polarity != Polarity::Negative,
            t.pattern,
        )
    });
    let mut selected: Vec<Trigger> = Vec::new();
    for t in candidates {
        if selected.last().map_or(true, |last| t.start >= last.end) {
            selected.push(t);
        }
    }
    selected
}

/// Non-overlapping trigger matches in `text`, case-insensitive and tolerant
/// of whitespace runs between template tokens.
pub fn find_triggers(text: &str, set: &PatternSet) -> Vec<Trigger> {
    find_triggers_folded(&text::fold(text), set)
}

pub(crate) fn find_triggers_folded(folded: &[char], set: &PatternSet) -> Vec<Trigger> {
    select_non_overlapping(candidate_triggers(folded, set))
}

/// Whether `text` contains any negative trigger.
pub fn has_negative_trigger(text: &str, set: &PatternSet) -> bool {
    find_triggers(text, set)
        .iter()
        .any(|t| t.polarity == Polarity::Negative)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span_text(text: &str, t: &Trigger) -> String {
        text.chars().skip(t.start).take(t.end - t.start).collect()
    }

    #[test]
    fn parses_alternation() {
        let set = compile_patterns("i (was|am) diagnosed with").unwrap();
        assert_eq!(set.positives().count(), 1);
        let p = &set.patterns()[0];
        assert_eq!(p.tokens().len(), 4);
        match &p.tokens()[1] {
            TemplateToken::Group { branches, optional } => {
                assert_eq!(branches.len(), 2);
                assert!(!optional);
            }
            other => panic!("unexpected token {other:?}"),
        }
    }

    #[test]
    fn parses_negative_optional() {
        let set = compile_patterns("i was diagnosed\n!i was never (clinically )?diagnosed").unwrap();
        assert_eq!(set.negatives().count(), 1);
        let neg = set.negatives().next().unwrap();
        assert!(matches!(
            &neg.tokens()[3],
            TemplateToken::Group { optional: true, branches } if branches == &vec![vec!["clinically".to_string()]]
        ));
    }

    #[test]
    fn reports_every_bad_line() {
        let err = compile_patterns("i (was|) diagnosed").unwrap_err();
        assert_eq!(
            err.errors,
            vec![LineError {
                line: 1,
                message: "empty alternation branch".into()
            }]
        );

        let err = compile_patterns("# header\ni (was diagnosed\nok line\na) b\n(x)?\n!").unwrap_err();
        let lines: Vec<usize> = err.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 4, 5, 6]);
    }

    #[test]
    fn empty_file_is_error() {
        assert!(compile_patterns("").is_err());
        assert!(compile_patterns("# only comments\n\n").is_err());
        let err = compile_patterns("!i was never diagnosed").unwrap_err();
        assert_eq!(err.errors[0].line, 0);
    }

    #[test]
    fn finds_optional_group_span() {
        let set = compile_patterns("i was (officially )?diagnosed with").unwrap();
        let text = "I was officially diagnosed with ADHD last year.";
        let t = find_triggers(text, &set);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].polarity, Polarity::Positive);
        assert_eq!(span_text(text, &t[0]), "I was officially diagnosed with");
        assert!(find_triggers("nothing here", &set).is_empty());
    }

    #[test]
    fn finds_negative_span() {
        let set = compile_patterns("i was diagnosed with\n!i was never (clinically )?diagnosed").unwrap();
        let t = find_triggers("i was never clinically diagnosed", &set);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].polarity, Polarity::Negative);
        assert_eq!((t[0].start, t[0].end), (0, 32));
        assert!(has_negative_trigger("I was   NEVER\ndiagnosed.", &set));
    }

    #[test]
    fn whitespace_runs_and_word_boundaries() {
        let set = compile_patterns("i was diagnosed with").unwrap();
        assert_eq!(find_triggers("so I  was\t\ndiagnosed   with it", &set).len(), 1);
        assert!(find_triggers("hi was diagnosed with", &set).is_empty());
        assert!(find_triggers("i was diagnosed without", &set).is_empty());
        assert!(find_triggers("i wasdiagnosed with", &set).is_empty());
    }

    #[test]
    fn overlapping_matches_resolve_leftmost_longest() {
        let set = compile_patterns("diagnosed with\ni was diagnosed with\n!i was never diagnosed").unwrap();
        let text = "i was diagnosed with x. i was never diagnosed with y";
        let t = find_triggers(text, &set);
        assert_eq!(t.len(), 2);
        assert_eq!(span_text(text, &t[0]), "i was diagnosed with");
        assert_eq!(t[1].polarity, Polarity::Negative);
        assert_eq!(span_text(text, &t[1]), "i was never diagnosed");
    }

    #[test]
    fn leading_optional_group() {
        let set = compile_patterns("(officially )?diagnosed with").unwrap();
        let text = "i got officially diagnosed with it";
        let t = find_triggers(text, &set);
        assert_eq!(t.len(), 1);
        assert_eq!(span_text(text, &t[0]), "officially diagnosed with");
    }
}
