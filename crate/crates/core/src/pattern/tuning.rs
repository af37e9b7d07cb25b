use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};

use super::lexicon::nearest_keywords;
use super::{Lexicons, PatternSet};
use crate::metrics::{fbeta, Counts};
use crate::{text, Condition, Error, Result};

/// An annotated development post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevPost {
    pub text: String,
    #[serde(default)]
    pub conditions: BTreeSet<Condition>,
}

/// One point of the distance tuning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrCurvePoint {
    pub max_dist: usize,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f05: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub curve: Vec<PrCurvePoint>,
    /// Grid value with the highest F0.5; ties go to the smaller distance.
    pub chosen_max_dist: usize,
}

/// Sweeps the trigger-keyword window over `grid` and scores the predicted
/// condition set of each post against its gold set, micro-averaged over
/// (post, condition) decisions.
pub fn tune_distance(
    dev: &[DevPost],
    set: &PatternSet,
    lexicons: &Lexicons,
    grid: &[usize],
) -> Result<Tuning> {
    if dev.is_empty() {
        return Err(Error::insufficient("empty development set"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty distance grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("distance grid must be strictly increasing"));
    }

    // Smallest gap per condition per post; a condition is predicted at
    // distance d iff its smallest gap is <= d.
    let nearest: Vec<BTreeMap<Condition, usize>> = dev
        .iter()
        .map(|post| {
            let mut best: BTreeMap<Condition, usize> = BTreeMap::new();
            for m in nearest_keywords("", &text::fold(&post.text), set, lexicons) {
                let e = best.entry(m.condition).or_insert(m.gap_chars);
                *e = (*e).min(m.gap_chars);
            }
            best
        })
        .collect();

    let mut curve = Vec::with_capacity(grid.len());
    for &d in grid {
        let mut counts = Counts::default();
        for (post, gaps) in dev.iter().zip(&nearest) {
            let predicted: BTreeSet<Condition> =
                gaps.iter().filter(|(_, &g)| g <= d).map(|(&c, _)| c).collect();
            counts.tp += predicted.intersection(&post.conditions).count() as u64;
            counts.fp += predicted.difference(&post.conditions).count() as u64;
            counts.fn_ += post.conditions.difference(&predicted).count() as u64;
        }
        let (precision, recall) = (counts.precision(), counts.recall());
        curve.push(PrCurvePoint {
            max_dist: d,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision,
            recall,
            f1: fbeta(precision, recall, 1.0)?,
            f05: fbeta(precision, recall, 0.5)?,
        });
    }

    let mut chosen = curve[0];
    for p in &curve[1..] {
        if p.f05 > chosen.f05 {
            chosen = *p;
        }
    }
    Ok(Tuning {
        chosen_max_dist: chosen.max_dist,
        curve,
    })
}

/// Writes the curve as TSV with a header row.
pub fn write_curve_tsv<W: io::Write>(mut out: W, curve: &[PrCurvePoint]) -> io::Result<()> {
    writeln!(out, "max_dist\ttp\tfp\tfn\tprecision\trecall\tf1\tf05")?;
    for p in curve {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            p.max_dist, p.tp, p.fp, p.fn_, p.precision, p.recall, p.f1, p.f05
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub per_condition: BTreeMap<String, f64>,
    /// Unweighted mean over conditions with at least one record.
    pub macro_precision: f64,
}

/// Precision of manually verified matches, per condition label and
/// macro-averaged. Each record is `(label, verdict_is_correct)`.
pub fn evaluate_precision<S: AsRef<str>>(records: &[(S, bool)]) -> Result<PrecisionReport> {
    if records.is_empty() {
        return Err(Error::insufficient("no annotated matches"));
    }
    let mut tallies: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for (label, correct) in records {
        let t = tallies.entry(label.as_ref().to_string()).or_default();
        t.1 += 1;
        if *correct {
            t.0 += 1;
        }
    }
    let per_condition: BTreeMap<String, f64> = tallies
        .into_iter()
        .map(|(label, (ok, total))| (label, ok as f64 / total as f64))
        .collect();
    let macro_precision = per_condition.values().sum::<f64>() / per_condition.len() as f64;
    Ok(PrecisionReport {
        per_condition,
        macro_precision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{compile_patterns, ConditionLexicon};

    fn assets() -> (PatternSet, Lexicons) {
        let set = compile_patterns("i was diagnosed with").unwrap();
        let lex = Lexicons::new(vec![
            ConditionLexicon {
                condition: Condition::Depression,
                keywords: vec!["depression".into()],
            },
            ConditionLexicon {
                condition: Condition::Anxiety,
                keywords: vec!["anxiety".into()],
            },
        ])
        .unwrap();
        (set, lex)
    }

    fn dev(text: &str, conds: &[Condition]) -> DevPost {
        DevPost {
            text: text.into(),
            conditions: conds.iter().copied().collect(),
        }
    }

    #[test]
    fn distractor_sets_the_threshold() {
        // Gold keywords sit 3-10 characters from the trigger; the distractor
        // in the last post sits 50 characters away.
        let pad = |n: usize| " ".to_string() + &"x".repeat(n - 2) + " ";
        let posts = vec![
            dev(&format!("i was diagnosed with{}depression", pad(5)), &[Condition::Depression]),
            dev(&format!("i was diagnosed with{}anxiety", pad(10)), &[Condition::Anxiety]),
            dev(&format!("i was diagnosed with{}depression", pad(8)), &[Condition::Depression]),
            dev(
                &format!("i was diagnosed with{}depression{}anxiety", pad(3), pad(50 - 3 - 10)),
                &[Condition::Depression],
            ),
        ];
        let (set, lex) = assets();
        let tuning = tune_distance(&posts, &set, &lex, &[5, 10, 20, 50, 60]).unwrap();
        // Hand counts: d=5 catches the 5- and 3-character gaps only.
        let expected: Vec<(u64, u64, u64)> = vec![(2, 0, 2), (4, 0, 0), (4, 0, 0), (4, 1, 0), (4, 1, 0)];
        let got: Vec<(u64, u64, u64)> = tuning.curve.iter().map(|p| (p.tp, p.fp, p.fn_)).collect();
        assert_eq!(got, expected);
        assert_eq!(tuning.chosen_max_dist, 10);
        for w in tuning.curve.windows(2) {
            assert!(w[1].recall >= w[0].recall);
        }
    }

    #[test]
    fn ties_prefer_the_smaller_distance() {
        let (set, lex) = assets();
        let posts = vec![dev("i was diagnosed with depression", &[Condition::Depression])];
        let t = tune_distance(&posts, &set, &lex, &[10, 20, 40]).unwrap();
        assert!(t.curve.iter().all(|p| p.precision == 1.0 && p.recall == 1.0 && p.f05 == 1.0));
        assert_eq!(t.chosen_max_dist, 10);
    }

    #[test]
    fn tuning_rejects_bad_input() {
        let (set, lex) = assets();
        assert!(tune_distance(&[], &set, &lex, &[10]).is_err());
        let posts = vec![dev("x", &[])];
        assert!(tune_distance(&posts, &set, &lex, &[]).is_err());
        assert!(tune_distance(&posts, &set, &lex, &[10, 10]).is_err());
        assert!(tune_distance(&posts, &set, &lex, &[20, 10]).is_err());
    }

    #[test]
    fn curve_tsv_layout() {
        let (set, lex) = assets();
        let posts = vec![dev("i was diagnosed with depression", &[Condition::Depression])];
        let t = tune_distance(&posts, &set, &lex, &[1]).unwrap();
        let mut buf = Vec::new();
        write_curve_tsv(&mut buf, &t.curve).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "max_dist\ttp\tfp\tfn\tprecision\trecall\tf1\tf05\n1\t1\t0\t0\t1.000000\t1.000000\t1.000000\t1.000000\n"
        );
    }

    #[test]
    fn pooled_precision() {
        let records: Vec<(&str, bool)> = (0..500).map(|i| ("all", i >= 18)).collect();
        let r = evaluate_precision(&records).unwrap();
        assert!((r.per_condition["all"] - 0.964).abs() < 1e-12);
        assert!((r.macro_precision - 0.964).abs() < 1e-12);
    }

    #[test]
    fn macro_precision_is_unweighted() {
        let mut records = vec![("a", true); 10];
        records.extend(vec![("b", true); 9]);
        records.push(("b", false));
        let r = evaluate_precision(&records).unwrap();
        assert!((r.macro_precision - 0.95).abs() < 1e-12);

        let mut records = Vec::new();
        let mut expected = 0.0;
        for (k, cond) in Condition::ALL.iter().enumerate() {
            let correct = 90 + k as u32 + (k as u32 / 8);
            expected += correct as f64 / 100.0;
            for i in 0..100 {
                records.push((cond.as_str(), i < correct));
            }
        }
        let r = evaluate_precision(&records).unwrap();
        assert!((r.macro_precision - expected / 9.0).abs() < 1e-12);
        assert!(evaluate_precision::<&str>(&[]).is_err());
    }
}
