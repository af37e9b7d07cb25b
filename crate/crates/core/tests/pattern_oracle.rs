//! match_conditions against a naive scan over every substring.

use proptest::prelude::*;

use smhd_core::pattern::{compile_patterns, match_conditions, ConditionLexicon, Lexicons, Polarity};
use smhd_core::text::fold;
use smhd_core::Condition;

const POSITIVE: &[&str] = &["i was diagnosed with", "diagnosed with", "my doctor diagnosed me with", "i have"];
const NEGATIVE: &[&str] = &["never diagnosed", "i was never diagnosed"];

fn keywords() -> Vec<(Condition, Vec<&'static str>)> {
    vec![
        (Condition::Depression, vec!["depression", "major depression", "depressed"]),
        (Condition::Bipolar, vec!["bipolar", "bipolar disorder", "manic depression"]),
        (Condition::Adhd, vec!["adhd", "add"]),
        (Condition::Ptsd, vec!["ptsd"]),
    ]
}

fn boundary_before(t: &[char], at: usize) -> bool {
    at == 0 || !t[at - 1].is_alphanumeric()
}

fn boundary_after(t: &[char], at: usize) -> bool {
    at == t.len() || !t[at].is_alphanumeric()
}

/// Whether `t[i..j]` spells `phrase` with whitespace runs between its words.
fn spells(t: &[char], i: usize, j: usize, phrase: &str) -> bool {
    if i >= j || t[i].is_whitespace() || t[j - 1].is_whitespace() {
        return false;
    }
    let s: String = t[i..j].iter().collect();
    s.split_whitespace().eq(phrase.split_whitespace())
}

fn occurrences(t: &[char], phrase: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..t.len() {
        for j in i + 1..=t.len() {
            if boundary_before(t, i) && boundary_after(t, j) && spells(t, i, j, phrase) {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    start: usize,
    end: usize,
    negative: bool,
    idx: usize,
}

fn oracle(text: &str) -> Vec<((usize, usize), Condition, (usize, usize), usize)> {
    let t = fold(text);
    let mut cands = Vec::new();
    for (idx, (p, negative)) in POSITIVE
        .iter()
        .map(|p| (p, false))
        .chain(NEGATIVE.iter().map(|p| (p, true)))
        .enumerate()
    {
        let occ = occurrences(&t, p);
        for &(s, _) in &occ {
            let end = occ.iter().filter(|o| o.0 == s).map(|o| o.1).max().unwrap();
            if !cands.iter().any(|c: &Cand| c.idx == idx && c.start == s) {
                cands.push(Cand { start: s, end, negative, idx });
            }
        }
    }
    cands.sort_by_key(|c| (c.start, std::cmp::Reverse(c.end), !c.negative, c.idx));
    let mut chosen: Vec<Cand> = Vec::new();
    for c in cands {
        if chosen.last().map_or(true, |l| c.start >= l.end) {
            chosen.push(c);
        }
    }
    let mut hits = Vec::new();
    for (cond, kws) in keywords() {
        for k in kws {
            for (s, e) in occurrences(&t, k) {
                hits.push((cond, s, e));
            }
        }
    }
    let mut out = Vec::new();
    for tr in chosen.iter().filter(|c| !c.negative) {
        for cond in keywords().into_iter().map(|k| k.0) {
            let best = hits
                .iter()
                .filter(|h| h.0 == cond)
                .filter_map(|&(_, s, e)| {
                    let g = if s >= tr.end {
                        s - tr.end
                    } else if e <= tr.start {
                        tr.start - e
                    } else {
                        return None;
                    };
                    Some((g, s, e))
                })
                .min();
            if let Some((g, s, e)) = best {
                out.push(((tr.start, tr.end), cond, (s, e), g));
            }
        }
    }
    out.sort();
    out
}

fn fragment() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "I was diagnosed with",
        "i  was\tdiagnosed\nwith",
        "diagnosed with",
        "My doctor diagnosed me with",
        "I have",
        "I was never diagnosed",
        "never diagnosed",
        "depression",
        "Major Depression",
        "depressed",
        "bipolar disorder",
        "bipolar",
        "manic depression",
        "ADHD",
        "add",
        "address",
        "ptsd",
        "sadly",
        "it",
        "xx",
    ])
    .prop_map(String::from)
}

fn separator() -> impl Strategy<Value = String> {
    prop::sample::select(vec![" ", "  ", "\n", ", ", ".", "-", "", "x ", " and "]).prop_map(String::from)
}

fn post() -> impl Strategy<Value = String> {
    prop::collection::vec((fragment(), separator()), 0..20).prop_map(|parts| {
        let s: String = parts.into_iter().map(|(f, sep)| f + &sep).collect();
        s.chars().take(500).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_equal_naive_scan(text in post()) {
        let mut source = POSITIVE.join("\n");
        for n in NEGATIVE {
            source.push_str(&format!("\n!{n}"));
        }
        let set = compile_patterns(&source).unwrap();
        prop_assert_eq!(set.patterns().iter().filter(|p| p.polarity() == Polarity::Negative).count(), NEGATIVE.len());
        let lex = Lexicons::new(
            keywords()
                .into_iter()
                .map(|(condition, kws)| ConditionLexicon {
                    condition,
                    keywords: kws.into_iter().map(String::from).collect(),
                })
                .collect(),
        )
        .unwrap();
        let mut got: Vec<_> = match_conditions("p", &text, &set, &lex, usize::MAX)
            .into_iter()
            .map(|m| (m.trigger_span, m.condition, m.keyword_span, m.gap_chars))
            .collect();
        got.sort();
        prop_assert_eq!(got, oracle(&text));
    }
}
