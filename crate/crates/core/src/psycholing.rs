//! Word-category scoring and group comparisons (Welch's t-test, Cohen's d,
//! Bonferroni correction).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRecord, Role};
use crate::corpus::UserDoc;
use crate::{Condition, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Entry {
    Word(String),
    /// Written `stem*`; matches any token starting with `stem`.
    Prefix(String),
}

impl Entry {
    pub fn parse(raw: &str) -> Result<Entry> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(Error::asset("categories", "empty entry"));
        }
        if raw.chars().any(|c| c.is_uppercase()) {
            return Err(Error::asset("categories", format!("entry `{raw}` is not lowercase")));
        }
        match raw.strip_suffix('*') {
            Some("") => Err(Error::asset("categories", "prefix entry with empty stem")),
            Some(stem) if stem.contains('*') => {
                Err(Error::asset("categories", format!("entry `{raw}` has an inner `*`")))
            }
            Some(stem) => Ok(Entry::Prefix(stem.to_string())),
            None if raw.contains('*') => {
                Err(Error::asset("categories", format!("entry `{raw}` has an inner `*`")))
            }
            None => Ok(Entry::Word(raw.to_string())),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Entry::Word(w) => token == w,
            Entry::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

/// Named word categories.
#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    names: Vec<String>,
    entries: Vec<Vec<Entry>>,
    words: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, usize)>,
}

impl CategoryLexicon {
    pub fn new(categories: BTreeMap<String, Vec<Entry>>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::asset("categories", "no categories"));
        }
        let mut names = Vec::new();
        let mut entries = Vec::new();
        let mut words: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes = Vec::new();
        for (idx, (name, list)) in categories.into_iter().enumerate() {
            if list.is_empty() {
                return Err(Error::asset("categories", format!("category `{name}` has no entries")));
            }
            for e in &list {
                match e {
                    Entry::Word(w) => {
                        let cats = words.entry(w.clone()).or_default();
                        if !cats.contains(&idx) {
                            cats.push(idx);
                        }
                    }
                    Entry::Prefix(p) => prefixes.push((p.clone(), idx)),
                }
            }
            names.push(name);
            entries.push(list);
        }
        Ok(CategoryLexicon {
            names,
            entries,
            words,
            prefixes,
        })
    }

    /// Parses `category<TAB>entry` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn from_tsv(body: &str) -> Result<Self> {
        let mut categories: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        for (i, line) in body.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (cat, entry) = line.split_once('\t').ok_or_else(|| {
                Error::asset("categories", format!("line {}: expected `category<TAB>entry`", i + 1))
            })?;
            let cat = cat.trim();
            if cat.is_empty() {
                return Err(Error::asset("categories", format!("line {}: empty category", i + 1)));
            }
            let entry = Entry::parse(entry)
                .map_err(|e| Error::asset("categories", format!("line {}: {e}", i + 1)))?;
            let list = categories.entry(cat.to_string()).or_default();
            if !list.contains(&entry) {
                list.push(entry);
            }
        }
        CategoryLexicon::new(categories)
    }

    /// Category names in sorted order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn entries(&self, category: &str) -> Option<&[Entry]> {
        let i = self.names.binary_search_by(|n| n.as_str().cmp(category)).ok()?;
        Some(&self.entries[i])
    }

    /// Indices of the categories a token belongs to, deduplicated.
    fn categories_of(&self, token: &str, out: &mut Vec<usize>) {
        out.clear();
        if let Some(cats) = self.words.get(token) {
            out.extend_from_slice(cats);
        }
        for (stem, idx) in &self.prefixes {
            if token.starts_with(stem.as_str()) {
                out.push(*idx);
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Per-category match counts and the token total.
    pub fn count_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> (Vec<u64>, u64) {
        let mut counts = vec![0u64; self.names.len()];
        let mut total = 0;
        let mut buf = Vec::new();
        for tok in tokens {
            total += 1;
            self.categories_of(tok, &mut buf);
            for &c in &buf {
                counts[c] += 1;
            }
        }
        (counts, total)
    }
}

/// Percentage of a user's tokens falling in each category.
pub fn score_user(doc: &UserDoc, lexicon: &CategoryLexicon) -> Result<BTreeMap<String, f64>> {
    let tokens = doc.tokens();
    score_tokens(tokens.iter().map(String::as_str), lexicon)
        .ok_or_else(|| Error::insufficient(format!("user {} has no tokens", doc.user_id())))
}

fn score_tokens<'a>(
    tokens: impl IntoIterator<Item = &'a str>,
    lexicon: &CategoryLexicon,
) -> Option<BTreeMap<String, f64>> {
    let (counts, total) = lexicon.count_tokens(tokens);
    if total == 0 {
        return None;
    }
    Some(
        lexicon
            .names
            .iter()
            .zip(counts)
            .map(|(n, c)| (n.clone(), 100.0 * c as f64 / total as f64))
            .collect(),
    )
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = crate::stats::neumaier(xs.iter().copied()) / n;
    let ss = crate::stats::neumaier(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, ss / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test.
///
/// When both samples have zero variance the statistic is undefined: equal
/// means give `t = 0, p = 1`, unequal means give `t = ±inf, p = 0`. In both
/// cases `df = n_a + n_b - 2`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::insufficient("each sample needs at least 2 values"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        if ma == mb {
            return Ok(WelchResult { t: 0.0, df, p: 1.0 });
        }
        warn!("both samples have zero variance with different means; p set to 0");
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(WelchResult { t, df, p: 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: t_two_sided_p(t, df),
    })
}

/// Standardized mean difference with the pooled sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::insufficient("each sample needs at least 2 values"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        if ma == mb {
            return Ok(0.0);
        }
        return Err(Error::insufficient("zero pooled variance with different means"));
    }
    Ok((ma - mb) / pooled)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Student's t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const BETA_EPS: f64 = 1e-12;
const BETA_MAX_ITER: usize = 300;

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_EPS {
            return h;
        }
    }
    warn!("incomplete beta did not converge for x={x}, a={a}, b={b}");
    h
}

/// `min(1, m * p)`.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}

/// Significance marker for an adjusted p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "")]
    None,
    /// p < 0.01
    #[serde(rename = "★")]
    One,
    /// p < 0.001
    #[serde(rename = "†")]
    Two,
    /// p < 0.0001
    #[serde(rename = "‡")]
    Three,
}

impl Stars {
    pub fn from_p(p_adjusted: f64) -> Stars {
        if p_adjusted < 0.0001 {
            Stars::Three
        } else if p_adjusted < 0.001 {
            Stars::Two
        } else if p_adjusted < 0.01 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "★",
            Stars::Two => "†",
            Stars::Three => "‡",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One (category, condition) comparison against the control group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub category: String,
    pub condition: Condition,
    pub n_diag: usize,
    pub n_ctrl: usize,
    pub mean_diag: f64,
    pub mean_ctrl: f64,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub cohens_d: f64,
    pub stars: Stars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub rows: Vec<EffectRow>,
    /// Number of tests used for the Bonferroni correction.
    pub tests: usize,
    /// Users left out because they had no tokens.
    pub excluded_users: Vec<String>,
    /// Conditions skipped for having fewer than two scored users.
    pub skipped_conditions: Vec<Condition>,
}

/// Compares every category between each condition group and the control
/// group. Users missing from `docs` or with no tokens are excluded.
pub fn analyze(
    cohort: &[CohortRecord],
    docs: &BTreeMap<String, UserDoc>,
    lexicon: &CategoryLexicon,
) -> Result<Analysis> {
    let scored: Vec<(&CohortRecord, Option<Vec<f64>>)> = cohort
        .par_iter()
        .map(|r| {
            let scores = docs.get(&r.user_id).and_then(|doc| {
                let tokens = doc.tokens();
                score_tokens(tokens.iter().map(String::as_str), lexicon)
                    .map(|m| m.into_values().collect::<Vec<f64>>())
            });
            (r, scores)
        })
        .collect();

    let mut excluded_users = Vec::new();
    let mut control: Vec<&[f64]> = Vec::new();
    let mut groups: BTreeMap<Condition, Vec<&[f64]>> = BTreeMap::new();
    for (r, scores) in &scored {
        let Some(s) = scores else {
            excluded_users.push(r.user_id.clone());
            continue;
        };
        match r.role {
            Role::Control => control.push(s),
            Role::Diagnosed => {
                for c in &r.conditions {
                    groups.entry(*c).or_default().push(s);
                }
            }
        }
    }
    if !excluded_users.is_empty() {
        info!("{} users excluded for having no tokens", excluded_users.len());
    }
    if control.len() < 2 {
        return Err(Error::insufficient("fewer than 2 scored control users"));
    }

    let mut skipped_conditions = Vec::new();
    let mut compared = Vec::new();
    for c in Condition::ALL {
        match groups.get(&c) {
            Some(g) if g.len() >= 2 => compared.push((c, g)),
            _ => {
                warn!("condition {c} has fewer than 2 scored users; rows omitted");
                skipped_conditions.push(c);
            }
        }
    }
    let tests = lexicon.names().len() * compared.len();

    let column = |users: &[&[f64]], k: usize| users.iter().map(|s| s[k]).collect::<Vec<f64>>();
    let pairs: Vec<(usize, Condition, &Vec<&[f64]>)> = (0..lexicon.names().len())
        .flat_map(|k| compared.iter().map(move |(c, g)| (k, *c, *g)))
        .collect();
    let rows: Vec<Option<EffectRow>> = pairs
        .par_iter()
        .map(|&(k, condition, group)| {
            let a = column(group, k);
            let b = column(&control, k);
            let w = welch_t(&a, &b).ok()?;
            let d = match cohens_d(&a, &b) {
                Ok(d) => d,
                Err(_) => {
                    warn!(
                        "category {} for {condition}: constant groups with different means; row omitted",
                        lexicon.names()[k]
                    );
                    return None;
                }
            };
            let p_adjusted = bonferroni(w.p, tests);
            Some(EffectRow {
                category: lexicon.names()[k].clone(),
                condition,
                n_diag: a.len(),
                n_ctrl: b.len(),
                mean_diag: mean_var(&a).0,
                mean_ctrl: mean_var(&b).0,
                t_stat: w.t,
                df: w.df,
                p_value: w.p,
                p_adjusted,
                cohens_d: d,
                stars: Stars::from_p(p_adjusted),
            })
        })
        .collect();
    Ok(Analysis {
        rows: rows.into_iter().flatten().collect(),
        tests,
        excluded_users,
        skipped_conditions,
    })
}

pub const REPORT_HEADER: &str =
    "category\tcondition\tn_diag\tn_ctrl\tmean_diag\tmean_ctrl\tt_stat\tdf\tp_value\tp_adjusted\tcohens_d\tstars";

pub fn write_report_tsv<W: io::Write>(mut out: W, rows: &[EffectRow]) -> io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\t{:.6e}\t{:.6e}\t{:.6}\t{}",
            r.category,
            r.condition,
            r.n_diag,
            r.n_ctrl,
            r.mean_diag,
            r.mean_ctrl,
            r.t_stat,
            r.df,
            r.p_value,
            r.p_adjusted,
            r.cohens_d,
            r.stars
        )?;
    }
    Ok(())
}
