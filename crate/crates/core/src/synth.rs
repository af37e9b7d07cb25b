//! Seeded synthetic corpora with planted diagnoses and category shifts.
//!
//! Text is built from pseudo-words (consonant-vowel syllables) that are
//! screened against the bundled category lexicon, mental-health terms,
//! condition keywords and removal terms, mixed with function words drawn
//! from the category lexicon. Diagnosed users get one diagnosis post with a
//! planted trigger-keyword gap; their other posts draw content words from a
//! condition-specific vocabulary with probability `shift_strength`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Post, WINDOW_END, WINDOW_START};
use crate::pattern::DevPost;
use crate::psycholing::{CategoryLexicon, Entry};
use crate::text::{normalize_phrase, PhraseSet};
use crate::{assets, Condition, Error, Result};

/// Planted gap range with its share of statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBand {
    pub min: usize,
    pub max: usize,
    pub fraction: f64,
}

/// Users reporting several conditions at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComorbidGroup {
    pub conditions: Vec<Condition>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Single-condition diagnosed users per condition.
    pub diagnosed: BTreeMap<Condition, usize>,
    pub comorbid: Vec<ComorbidGroup>,
    pub controls: usize,
    /// Diagnosed-looking users who also post a negated diagnosis.
    pub negated: usize,
    /// Diagnosed-looking users with fewer than 50 clean posts.
    pub sparse: usize,
    /// Inclusive range of non-diagnosis posts per user.
    pub posts_per_user: (usize, usize),
    pub sparse_posts: (usize, usize),
    pub tokens_per_post: (usize, usize),
    pub background_vocab: usize,
    /// Words per condition-specific vocabulary.
    pub condition_vocab: usize,
    /// Probability that a diagnosed user's content word comes from the
    /// condition vocabulary.
    pub shift_strength: f64,
    pub shift_overrides: BTreeMap<Condition, f64>,
    /// Per-token probability of a function word from each category.
    pub category_rates: BTreeMap<String, f64>,
    /// Relative rate change for diagnosed users (0.3 means +30%).
    pub category_shifts: BTreeMap<String, f64>,
    pub positive_templates: Vec<String>,
    pub negative_templates: Vec<String>,
    /// Keyword written into diagnosis statements for each condition.
    pub keywords: BTreeMap<Condition, String>,
    pub gaps: Vec<GapBand>,
    pub subreddits: Vec<String>,
    pub subreddits_per_user: (usize, usize),
    /// Annotated single-statement posts for distance tuning.
    pub dev_posts: usize,
    /// Share of development posts carrying a keyword of another condition.
    pub dev_distractor_fraction: f64,
    /// Gap range between a distractor keyword and the trigger.
    pub dev_distractor_gap: (usize, usize),
}

fn default_subreddits() -> Vec<String> {
    [
        "aww", "news", "worldnews", "pics", "funny", "gaming", "movies", "music", "books", "science",
        "technology", "sports", "soccer", "nba", "cooking", "food", "diy", "gardening", "travel", "photography",
        "history", "space", "cars", "fitness", "television", "art", "programming", "askreddit", "jokes", "cats",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn default_keywords() -> BTreeMap<Condition, String> {
    use Condition::*;
    [
        (Depression, "depression"),
        (Adhd, "ADHD"),
        (Anxiety, "anxiety"),
        (Bipolar, "bipolar disorder"),
        (Ptsd, "PTSD"),
        (Autism, "autism"),
        (Ocd, "OCD"),
        (Schizophrenia, "schizophrenia"),
        (Eating, "eating disorder"),
    ]
    .into_iter()
    .map(|(c, k)| (c, k.to_string()))
    .collect()
}

fn default_rates() -> BTreeMap<String, f64> {
    let mut rates: BTreeMap<String, f64> = [
        "we", "you", "shehe", "they", "article", "prep", "negate", "posemo", "negemo", "anx", "social", "family",
        "work", "leisure", "money", "health", "time", "netspeak",
    ]
    .iter()
    .map(|c| (c.to_string(), 0.01))
    .collect();
    rates.insert("i".into(), 0.05);
    rates
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            diagnosed: [(Condition::Depression, 10)].into(),
            comorbid: Vec::new(),
            controls: 100,
            negated: 0,
            sparse: 0,
            posts_per_user: (51, 80),
            sparse_posts: (40, 49),
            tokens_per_post: (4, 12),
            background_vocab: 2000,
            condition_vocab: 200,
            shift_strength: 0.0,
            shift_overrides: BTreeMap::new(),
            category_rates: default_rates(),
            category_shifts: BTreeMap::new(),
            positive_templates: vec![
                "I was diagnosed with".into(),
                "I was officially diagnosed with".into(),
                "My doctor diagnosed me with".into(),
                "I've been diagnosed with".into(),
                "I have been clinically diagnosed with".into(),
            ],
            negative_templates: vec![
                "I was never clinically diagnosed.".into(),
                "I'm not sure if I was diagnosed properly.".into(),
                "I have never been formally diagnosed.".into(),
            ],
            keywords: default_keywords(),
            gaps: vec![GapBand {
                min: 1,
                max: 40,
                fraction: 1.0,
            }],
            subreddits: default_subreddits(),
            subreddits_per_user: (2, 4),
            dev_posts: 0,
            dev_distractor_fraction: 0.0,
            dev_distractor_gap: (50, 80),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldRole {
    Diagnosed,
    Control,
    Negated,
    Sparse,
}

/// One line of the gold file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub user_id: String,
    pub role: GoldRole,
    pub conditions: Vec<Condition>,
    pub planted_gap_chars: Option<usize>,
    pub category_shifts: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Grouped by user in id order, chronological within a user.
    pub posts: Vec<Post>,
    /// In id order.
    pub gold: Vec<GoldRecord>,
    pub dev: Vec<DevPost>,
}

impl SynthCorpus {
    pub fn write_posts<W: io::Write>(&self, out: W) -> io::Result<()> {
        crate::corpus::write_posts(out, &self.posts)
    }

    pub fn write_gold<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        for g in &self.gold {
            serde_json::to_writer(&mut out, g)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_dev<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        for d in &self.dev {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_gold<R: io::BufRead>(reader: R) -> Result<Vec<GoldRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::asset("gold", format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::invalid(format!("synth config: {}", msg.into()))
}

fn check_range(name: &str, r: (usize, usize), min: usize) -> Result<()> {
    if r.0 < min || r.0 > r.1 {
        return Err(invalid(format!("{name} must satisfy {min} <= min <= max, got {r:?}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn from_json(json: &str) -> Result<SynthConfig> {
        let cfg: SynthConfig = serde_json::from_str(json).map_err(|e| Error::asset("synth config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn shift_for(&self, c: Condition) -> f64 {
        self.shift_overrides.get(&c).copied().unwrap_or(self.shift_strength)
    }

    fn planted_conditions(&self) -> BTreeSet<Condition> {
        self.diagnosed
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(&c, _)| c)
            .chain(self.comorbid.iter().filter(|g| g.count > 0).flat_map(|g| g.conditions.iter().copied()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.posts_per_user.0 <= 50 {
            return Err(invalid(
                "posts_per_user must start above 50; use `sparse` to plant users below the threshold",
            ));
        }
        check_range("posts_per_user", self.posts_per_user, 51)?;
        if self.sparse > 0 {
            check_range("sparse_posts", self.sparse_posts, 0)?;
            if self.sparse_posts.1 >= 50 {
                return Err(invalid("sparse_posts must stay below 50"));
            }
        }
        check_range("tokens_per_post", self.tokens_per_post, 1)?;
        check_range("subreddits_per_user", self.subreddits_per_user, 1)?;
        let subs: BTreeSet<String> = self.subreddits.iter().map(|s| s.to_lowercase()).collect();
        if subs.len() < self.subreddits_per_user.1 {
            return Err(invalid("fewer distinct subreddits than subreddits_per_user allows"));
        }
        let policy = assets::policy()?;
        if let Some(s) = subs.iter().find(|s| policy.mh_subreddits().contains(*s)) {
            return Err(invalid(format!("subreddit `{s}` is a mental-health subreddit")));
        }
        if self.background_vocab == 0 {
            return Err(invalid("background_vocab must be positive"));
        }
        for (c, s) in std::iter::once((None, self.shift_strength))
            .chain(self.shift_overrides.iter().map(|(c, s)| (Some(*c), *s)))
        {
            if !(0.0..=1.0).contains(&s) {
                return Err(invalid(format!("shift strength {s} for {c:?} outside [0, 1]")));
            }
        }
        let planted = self.planted_conditions();
        if planted.iter().any(|&c| self.shift_for(c) > 0.0) && self.condition_vocab == 0 {
            return Err(invalid("condition_vocab must be positive when a shift is set"));
        }
        for g in &self.comorbid {
            let distinct: BTreeSet<_> = g.conditions.iter().collect();
            if distinct.len() < 2 || distinct.len() != g.conditions.len() {
                return Err(invalid("comorbid groups need at least two distinct conditions"));
            }
        }
        for c in &planted {
            if !self.keywords.contains_key(c) {
                return Err(invalid(format!("no keyword for {c}")));
            }
        }
        let lex = assets::lexicons()?;
        for (c, k) in &self.keywords {
            let known = lex.get(*c).is_some_and(|l| {
                l.keywords.iter().any(|w| normalize_phrase(w) == normalize_phrase(k))
            });
            if !known {
                return Err(invalid(format!("`{k}` is not a bundled keyword for {c}")));
            }
        }
        if self.gaps.is_empty() {
            return Err(invalid("no gap bands"));
        }
        let mut total = 0.0;
        for b in &self.gaps {
            if b.min == 0 || b.min > b.max || !(b.fraction >= 0.0) {
                return Err(invalid(format!("bad gap band {b:?}; gaps start at 1")));
            }
            total += b.fraction;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("gap fractions sum to {total}, not 1")));
        }
        let base: f64 = self.category_rates.values().sum();
        if self.category_rates.values().any(|&r| !(r >= 0.0)) {
            return Err(invalid("category rates must be non-negative"));
        }
        let shifted: f64 = self
            .category_rates
            .iter()
            .map(|(k, r)| r * (1.0 + self.category_shifts.get(k).copied().unwrap_or(0.0)))
            .sum();
        if base.max(shifted) > 0.9 {
            return Err(invalid("category rates leave too little room for content words"));
        }
        if let Some(k) = self.category_shifts.keys().find(|k| !self.category_rates.contains_key(*k)) {
            return Err(invalid(format!("shifted category `{k}` has no base rate")));
        }
        if self.category_shifts.values().any(|&s| s < -1.0) {
            return Err(invalid("category shifts below -1 would give negative rates"));
        }
        let statement_users = self.diagnosed.values().sum::<usize>()
            + self.comorbid.iter().map(|g| g.count).sum::<usize>()
            + self.negated
            + self.sparse;
        if statement_users + self.dev_posts > 0 && self.positive_templates.is_empty() {
            return Err(invalid("no positive templates"));
        }
        if self.negated > 0 && self.negative_templates.is_empty() {
            return Err(invalid("negated users need negative templates"));
        }
        if (self.negated > 0 || self.sparse > 0 || self.dev_posts > 0) && planted.is_empty() {
            return Err(invalid("negated, sparse and development posts need a planted condition"));
        }
        if self.dev_posts > 0 {
            if !(0.0..=1.0).contains(&self.dev_distractor_fraction) {
                return Err(invalid("dev_distractor_fraction outside [0, 1]"));
            }
            if self.dev_distractor_fraction > 0.0 {
                check_range("dev_distractor_gap", self.dev_distractor_gap, 1)?;
                if self.keywords.len() < 2 {
                    return Err(invalid("distractors need keywords for at least two conditions"));
                }
            }
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

struct Screen {
    categories: CategoryLexicon,
    phrases: Vec<PhraseSet>,
}

impl Screen {
    fn new() -> Result<Screen> {
        let policy = assets::policy()?;
        let lex = assets::lexicons()?;
        let keywords: Vec<String> = lex
            .conditions()
            .flat_map(|c| lex.get(c).map(|l| l.keywords.clone()).unwrap_or_default())
            .collect();
        Ok(Screen {
            categories: assets::categories()?,
            phrases: vec![
                policy.mh_terms().clone(),
                policy.removal_terms().clone(),
                PhraseSet::new(keywords)?,
            ],
        })
    }

    fn allowed(&self, word: &str) -> bool {
        let (counts, _) = self.categories.count_tokens([word]);
        counts.iter().all(|&c| c == 0) && !self.phrases.iter().any(|p| p.matches(word))
    }
}

fn pseudo_word(rng: &mut Pcg64) -> String {
    let syllables = rng.random_range(2..=4);
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
        w.push(*VOWELS.choose(rng).expect("non-empty") as char);
    }
    w
}

struct Vocabulary {
    background: Vec<String>,
    conditions: BTreeMap<Condition, Vec<String>>,
    /// Candidate function words per category.
    function: Vec<(String, Vec<String>)>,
}

fn build_vocabulary(cfg: &SynthConfig, rng: &mut Pcg64) -> Result<Vocabulary> {
    let screen = Screen::new()?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut draw = |n: usize, rng: &mut Pcg64| -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let w = pseudo_word(rng);
            if screen.allowed(&w) && seen.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    };
    let background = draw(cfg.background_vocab, rng);
    let mut conditions = BTreeMap::new();
    for c in cfg.planted_conditions() {
        conditions.insert(c, draw(cfg.condition_vocab, rng));
    }

    let lexicon = &screen.categories;
    let mut function = Vec::new();
    for (cat, rate) in &cfg.category_rates {
        let entries = lexicon
            .entries(cat)
            .ok_or_else(|| invalid(format!("category `{cat}` is not in the bundled category lexicon")))?;
        let own = lexicon.names().iter().position(|n| n == cat).expect("entry exists");
        let words: Vec<String> = entries
            .iter()
            .map(|e| match e {
                Entry::Word(w) | Entry::Prefix(w) => w.clone(),
            })
            .filter(|w| {
                let (counts, _) = lexicon.count_tokens([w.as_str()]);
                counts.iter().enumerate().all(|(i, &c)| (c > 0) == (i == own))
            })
            .collect();
        if words.is_empty() && *rate > 0.0 {
            return Err(invalid(format!("category `{cat}` has no word unique to it")));
        }
        function.push((cat.clone(), words));
    }
    Ok(Vocabulary {
        background,
        conditions,
        function,
    })
}

/// Largest-remainder apportionment of `n` items over `fractions`.
fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Band index per item, shuffled.
fn band_plan(n: usize, bands: &[GapBand], rng: &mut Pcg64) -> Vec<usize> {
    let counts = apportion(n, &bands.iter().map(|b| b.fraction).collect::<Vec<_>>());
    let mut plan: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat(i).take(c)).collect();
    plan.shuffle(rng);
    plan
}

/// Exactly `len` characters of spaces and pseudo-words, starting and ending
/// with a space.
fn filler(len: usize, words: &[String], rng: &mut Pcg64) -> String {
    if len <= 2 {
        return " ".repeat(len);
    }
    let mut s = String::from(" ");
    loop {
        let w = words.choose(rng).expect("non-empty vocabulary");
        // Room for the word, a separating space and the closing space.
        if s.len() + w.len() + 1 > len {
            break;
        }
        s.push_str(w);
        s.push(' ');
    }
    while s.len() < len {
        s.push(' ');
    }
    s
}

fn capitalize(s: &mut String) {
    if let Some(first) = s.get(0..1) {
        let up = first.to_uppercase();
        s.replace_range(0..1, &up);
    }
}

#[derive(Clone)]
struct Plan {
    role: GoldRole,
    conditions: Vec<Condition>,
    gap_band: Option<usize>,
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    vocab: &'a Vocabulary,
    subreddits: Vec<String>,
    separation: usize,
}

impl Generator<'_> {
    fn content_word(&self, rng: &mut Pcg64, conditions: &[Condition], diagnosed: bool) -> &str {
        if diagnosed && !conditions.is_empty() {
            let c = *conditions.choose(rng).expect("non-empty");
            if rng.random::<f64>() < self.cfg.shift_for(c) {
                if let Some(v) = self.vocab.conditions.get(&c).filter(|v| !v.is_empty()) {
                    return v.choose(rng).expect("non-empty");
                }
            }
        }
        self.vocab.background.choose(rng).expect("non-empty")
    }

    fn regular_post(&self, rng: &mut Pcg64, rates: &[(f64, usize)], conditions: &[Condition], diagnosed: bool) -> String {
        let n = rng.random_range(self.cfg.tokens_per_post.0..=self.cfg.tokens_per_post.1);
        let mut words: Vec<&str> = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = None;
            for &(rate, k) in rates {
                acc += rate;
                if u < acc {
                    chosen = Some(k);
                    break;
                }
            }
            match chosen {
                Some(k) => words.push(self.vocab.function[k].1.choose(rng).expect("checked non-empty")),
                None => words.push(self.content_word(rng, conditions, diagnosed)),
            }
        }
        let mut s = words.join(" ");
        capitalize(&mut s);
        s.push('.');
        s
    }

    fn words(&self, rng: &mut Pcg64, lo: usize, hi: usize) -> String {
        let n = rng.random_range(lo..=hi);
        (0..n)
            .map(|_| self.vocab.background.choose(rng).expect("non-empty").as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `trigger`, then exactly `gap` characters, then the keyword.
    fn statement(&self, rng: &mut Pcg64, condition: Condition, gap: usize) -> String {
        let trigger = self.cfg.positive_templates.choose(rng).expect("validated");
        format!(
            "{trigger}{}{}",
            filler(gap, &self.vocab.background, rng),
            self.cfg.keywords[&condition]
        )
    }

    fn diagnosis_post(&self, rng: &mut Pcg64, conditions: &[Condition], gap: usize) -> String {
        let mut s = self.words(rng, 0, 3);
        if !s.is_empty() {
            s.push(' ');
        }
        for (i, &c) in conditions.iter().enumerate() {
            if i > 0 {
                s.push_str(&filler(self.separation, &self.vocab.background, rng));
            }
            s.push_str(&self.statement(rng, c, gap));
        }
        let tail = self.words(rng, 0, 3);
        if !tail.is_empty() {
            s.push(' ');
            s.push_str(&tail);
        }
        s.push('.');
        capitalize(&mut s);
        s
    }

    fn draw_gap(&self, rng: &mut Pcg64, band: usize) -> usize {
        let b = self.cfg.gaps[band];
        rng.random_range(b.min..=b.max)
    }

    fn user(&self, index: usize, plan: &Plan) -> (Vec<Post>, GoldRecord) {
        let cfg = self.cfg;
        let mut rng = Pcg64::new(cfg.seed as u128, index as u128 + 1);
        let user_id = format!("u{index:06}");
        let k = rng.random_range(cfg.subreddits_per_user.0..=cfg.subreddits_per_user.1);
        let home: Vec<&String> = self.subreddits.choose_multiple(&mut rng, k).collect();
        let diagnosed = plan.role != GoldRole::Control;
        let shifts: BTreeMap<String, f64> = if diagnosed { cfg.category_shifts.clone() } else { BTreeMap::new() };
        let rates: Vec<(f64, usize)> = self
            .vocab
            .function
            .iter()
            .enumerate()
            .map(|(k, (cat, _))| {
                let base = cfg.category_rates[cat];
                (base * (1.0 + shifts.get(cat).copied().unwrap_or(0.0)), k)
            })
            .filter(|(r, _)| *r > 0.0)
            .collect();
        let range = if plan.role == GoldRole::Sparse { cfg.sparse_posts } else { cfg.posts_per_user };
        let n_clean = rng.random_range(range.0..=range.1);

        let mut texts: Vec<String> = (0..n_clean)
            .map(|_| self.regular_post(&mut rng, &rates, &plan.conditions, diagnosed))
            .collect();
        let mut gap = None;
        if let Some(band) = plan.gap_band {
            let g = self.draw_gap(&mut rng, band);
            gap = Some(g);
            texts.push(self.diagnosis_post(&mut rng, &plan.conditions, g));
        }
        if plan.role == GoldRole::Negated {
            let neg = cfg.negative_templates.choose(&mut rng).expect("validated");
            texts.push(neg.clone());
        }

        let mut stamps: Vec<i64> = (0..texts.len()).map(|_| rng.random_range(WINDOW_START..=WINDOW_END)).collect();
        stamps.sort_unstable();
        // Statement posts land at random positions in the history.
        texts.shuffle(&mut rng);
        let posts = texts
            .into_iter()
            .zip(stamps)
            .enumerate()
            .map(|(j, (text, created_utc))| Post {
                id: format!("{user_id}_{j:04}"),
                user_id: user_id.clone(),
                subreddit: home.choose(&mut rng).expect("k >= 1").to_string(),
                created_utc,
                text,
            })
            .collect();
        let gold = GoldRecord {
            user_id,
            role: plan.role,
            conditions: plan.conditions.clone(),
            planted_gap_chars: gap,
            category_shifts: shifts,
        };
        (posts, gold)
    }

    fn dev_post(&self, rng: &mut Pcg64, condition: Condition, band: usize, distractor: bool) -> DevPost {
        let gap = self.draw_gap(rng, band);
        let mut s = self.words(rng, 0, 3);
        if !s.is_empty() {
            s.push(' ');
        }
        if distractor {
            let others: Vec<Condition> = self.cfg.keywords.keys().copied().filter(|&c| c != condition).collect();
            let other = *others.choose(rng).expect("validated");
            let (lo, hi) = self.cfg.dev_distractor_gap;
            s.push_str(&self.cfg.keywords[&other]);
            s.push_str(&filler(rng.random_range(lo..=hi), &self.vocab.background, rng));
        }
        s.push_str(&self.statement(rng, condition, gap));
        s.push('.');
        capitalize(&mut s);
        DevPost {
            text: s,
            conditions: [condition].into(),
        }
    }
}

/// Builds the corpus described by `cfg`. The output is a pure function of
/// the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut master = Pcg64::new(cfg.seed as u128, 0);
    let vocab = build_vocabulary(cfg, &mut master)?;

    let mut diag_plans: Vec<Plan> = Vec::new();
    for (&c, &n) in &cfg.diagnosed {
        for _ in 0..n {
            diag_plans.push(Plan {
                role: GoldRole::Diagnosed,
                conditions: vec![c],
                gap_band: None,
            });
        }
    }
    for g in &cfg.comorbid {
        let mut conds = g.conditions.clone();
        conds.sort();
        for _ in 0..g.count {
            diag_plans.push(Plan {
                role: GoldRole::Diagnosed,
                conditions: conds.clone(),
                gap_band: None,
            });
        }
    }
    let bands = band_plan(diag_plans.len(), &cfg.gaps, &mut master);
    for (p, band) in diag_plans.iter_mut().zip(bands) {
        p.gap_band = Some(band);
    }
    let planted: Vec<Condition> = cfg.planted_conditions().into_iter().collect();
    let mut boundary: Vec<Plan> = Vec::new();
    for (role, n) in [(GoldRole::Negated, cfg.negated), (GoldRole::Sparse, cfg.sparse)] {
        for i in 0..n {
            boundary.push(Plan {
                role,
                conditions: vec![planted[i % planted.len()]],
                gap_band: None,
            });
        }
    }
    let bands = band_plan(boundary.len(), &cfg.gaps, &mut master);
    for (p, band) in boundary.iter_mut().zip(bands) {
        p.gap_band = Some(band);
    }
    let mut plans = diag_plans;
    plans.extend(boundary);
    plans.extend((0..cfg.controls).map(|_| Plan {
        role: GoldRole::Control,
        conditions: Vec::new(),
        gap_band: None,
    }));
    plans.shuffle(&mut master);

    let max_gap = cfg.gaps.iter().map(|b| b.max).max().unwrap_or(0);
    let mut subreddits: Vec<String> = cfg.subreddits.iter().map(|s| s.to_lowercase()).collect();
    subreddits.sort();
    subreddits.dedup();
    let gen = Generator {
        cfg,
        vocab: &vocab,
        subreddits,
        separation: max_gap + 100,
    };

    let users: Vec<(Vec<Post>, GoldRecord)> = plans.par_iter().enumerate().map(|(i, p)| gen.user(i, p)).collect();
    let mut posts = Vec::new();
    let mut gold = Vec::with_capacity(users.len());
    for (p, g) in users {
        posts.extend(p);
        gold.push(g);
    }

    let mut dev_rng = Pcg64::new(cfg.seed as u128, u128::MAX);
    let bands = band_plan(cfg.dev_posts, &cfg.gaps, &mut dev_rng);
    let n_distract = (cfg.dev_distractor_fraction * cfg.dev_posts as f64).round() as usize;
    let mut distract: Vec<bool> = (0..cfg.dev_posts).map(|i| i < n_distract).collect();
    distract.shuffle(&mut dev_rng);
    let dev = (0..cfg.dev_posts)
        .map(|i| {
            let c = planted[i % planted.len()];
            gen.dev_post(&mut dev_rng, c, bands[i], distract[i])
        })
        .collect();

    Ok(SynthCorpus { posts, gold, dev })
}
