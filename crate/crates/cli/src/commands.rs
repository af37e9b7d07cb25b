use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use smhd_core::classify::{
    apply_threshold, binary_subsets, evaluate, gold_labels, read_model, read_predictions, train, write_model,
    write_predictions, Classifier, TrainConfig,
};
use smhd_core::cohort::{read_cohort, CohortRecord, SelectionConfig, SplitRatios};
use smhd_core::corpus::{ingest_posts, open_posts, IngestOptions, IngestReport};
use smhd_core::mhfilter::MhPolicy;
use smhd_core::pattern::{compile_patterns, evaluate_precision, tune_distance, write_curve_tsv, DevPost, Lexicons, PatternSet};
use smhd_core::pipeline::{build_cohort, cohort_docs, filter_datasets, BuildConfig, BuildSummary};
use smhd_core::psycholing::{analyze, write_report_tsv, CategoryLexicon};
use smhd_core::stats::{dataset_stats, write_concomitance_tsv};
use smhd_core::synth::{generate, SynthConfig};
use smhd_core::{assets, Error, Result, UserDoc};

use crate::run::Run;
use crate::{AnalyzeArgs, BuildArgs, CohortInput, Command, EvalArgs, PatternArgs, PolicyArgs, StatsArgs, SynthArgs, TrainArgs, TuneArgs};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Tune(a) => tune(a),
        Command::Stats(a) => stats(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
    }
}

fn asset_error(name: &str, message: impl ToString) -> Error {
    Error::Asset {
        name: name.to_string(),
        message: message.to_string(),
    }
}

/// Parses one JSON object per non-blank line.
fn read_jsonl<T: for<'de> Deserialize<'de>>(name: &str, body: &[u8]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| asset_error(name, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn load_patterns(run: &mut Run, a: &PatternArgs) -> Result<(PatternSet, Lexicons)> {
    let patterns = compile_patterns(&run.asset(a.patterns.as_deref(), assets::PATTERNS)?)?;
    let lexicons = Lexicons::from_json(&run.asset(a.lexicons.as_deref(), assets::LEXICONS)?)?;
    Ok((patterns, lexicons))
}

fn load_policy(run: &mut Run, a: &PolicyArgs) -> Result<MhPolicy> {
    let subs = run.asset(a.mh_subreddits.as_deref(), assets::MH_SUBREDDITS)?;
    let terms = run.asset(a.mh_terms.as_deref(), assets::MH_TERMS)?;
    let removal = run.asset(a.removal_terms.as_deref(), assets::REMOVAL_TERMS)?;
    MhPolicy::from_lists(&subs, &terms, &removal)
}

fn load_users(run: &mut Run, path: &Path, strict_window: bool) -> Result<(BTreeMap<String, UserDoc>, IngestReport)> {
    run.track(path)?;
    let reader = open_posts(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let ingested = ingest_posts(reader, IngestOptions { strict_window })?;
    log::info!(
        "{}: {} accepted, {} rejected",
        path.display(),
        ingested.report.accepted,
        ingested.report.rejected
    );
    Ok((ingested.users, ingested.report))
}

fn load_cohort(run: &mut Run, input: &CohortInput) -> Result<Vec<CohortRecord>> {
    let bytes = run.read_bytes(&input.cohort)?;
    let records = read_cohort(&bytes[..])?;
    Ok(filter_datasets(&records, input.dataset.datasets()))
}

/// Cohort records of the chosen datasets with their cleaned documents.
fn load_cohort_docs(run: &mut Run, input: &CohortInput) -> Result<(Vec<CohortRecord>, BTreeMap<String, UserDoc>)> {
    let records = load_cohort(run, input)?;
    if records.is_empty() {
        return Err(Error::InsufficientData("no cohort records in the chosen datasets".into()));
    }
    let policy = load_policy(run, &input.policy)?;
    let (users, _) = load_users(run, &input.posts, input.strict_window)?;
    let docs = cohort_docs(&records, &users, &policy)?;
    Ok((records, docs))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::from_json(&run.read_text(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let corpus = generate(&cfg)?;
    run.write("posts.ndjson", |w| corpus.write_posts(w))?;
    run.write("gold.jsonl", |w| corpus.write_gold(w))?;
    run.write("dev.jsonl", |w| corpus.write_dev(w))?;
    run.finish("synth", a)
}

#[derive(Serialize)]
struct BuildReport<'a> {
    ingest: &'a IngestReport,
    cohort: &'a BuildSummary,
}

fn build(a: &BuildArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let (patterns, lexicons) = load_patterns(&mut run, &a.pattern)?;
    let policy = load_policy(&mut run, &a.policy)?;
    let ratios = match a.split_ratios[..] {
        [train, dev, test] => SplitRatios::new(train, dev, test)?,
        _ => return Err(Error::InvalidArgument("--split-ratios takes three values".into())),
    };
    let cfg = BuildConfig {
        selection: SelectionConfig {
            max_dist: a.max_dist,
            min_posts: a.min_posts,
        },
        target_controls: a.target_controls,
        ratios,
        split_seed: a.split_seed,
    };
    let (users, report) = load_users(&mut run, &a.posts, a.strict_window)?;
    let built = build_cohort(&users, &patterns, &lexicons, &policy, &cfg)?;
    log::info!(
        "{} diagnosed, {} matched controls, {} in the relaxed-control dataset",
        built.summary.diagnosed,
        built.summary.matched_controls,
        built.summary.smhd_rc
    );
    run.write("cohort.jsonl", |w| smhd_core::cohort::write_cohort(w, &built.records))?;
    run.write_json(
        "build_summary.json",
        &BuildReport {
            ingest: &report,
            cohort: &built.summary,
        },
    )?;
    run.finish("build", a)
}

#[derive(Deserialize)]
struct Verified {
    label: String,
    correct: bool,
}

fn tune(a: &TuneArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let (patterns, lexicons) = load_patterns(&mut run, &a.pattern)?;
    let dev: Vec<DevPost> = read_jsonl("dev posts", &run.read_bytes(&a.dev)?)?;
    let tuning = tune_distance(&dev, &patterns, &lexicons, &a.grid)?;
    run.write("curve.tsv", |w| write_curve_tsv(w, &tuning.curve))?;
    run.write_json("tuning.json", &tuning)?;
    if let Some(path) = &a.verified {
        let verified: Vec<Verified> = read_jsonl("verified matches", &run.read_bytes(path)?)?;
        let pairs: Vec<(String, bool)> = verified.into_iter().map(|v| (v.label, v.correct)).collect();
        run.write_json("precision.json", &evaluate_precision(&pairs)?)?;
    }
    run.finish("tune", a)?;
    println!("{}", tuning.chosen_max_dist);
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let (records, docs) = load_cohort_docs(&mut run, &a.input)?;
    let stats = dataset_stats(&records, &docs)?;
    run.write_json("stats.json", &stats)?;
    run.write("concomitance.tsv", |w| write_concomitance_tsv(w, &stats.concomitance))?;
    run.finish("stats", a)
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let lexicon = CategoryLexicon::from_tsv(&run.asset(a.categories.as_deref(), assets::CATEGORIES)?)?;
    let (records, docs) = load_cohort_docs(&mut run, &a.input)?;
    let analysis = analyze(&records, &docs, &lexicon)?;
    run.write("report.tsv", |w| write_report_tsv(w, &analysis.rows))?;
    run.write_json("analysis.json", &analysis)?;
    run.finish("analyze", a)
}

#[derive(Serialize)]
struct TrainingReport<'a> {
    kind: &'a str,
    task: &'a str,
    labels: &'a [smhd_core::Condition],
    vocab_size: Option<usize>,
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let (records, docs) = load_cohort_docs(&mut run, &a.input)?;
    let mut cfg = TrainConfig {
        kind: a.model.into(),
        task: a.task.into(),
        conditions: a.conditions.clone(),
        min_token_count: a.min_token_count,
        seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(e) = a.epochs {
        cfg.linear.epochs = e;
        cfg.fasttext.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        cfg.linear.learning_rate = lr;
        cfg.fasttext.learning_rate = lr;
    }
    if let Some(l2) = a.l2 {
        cfg.linear.l2 = l2;
    }
    if let Some(dim) = a.dim {
        cfg.fasttext.dim = dim;
    }
    let model = train(&records, &docs, &cfg)?;
    run.write("model.bin", |w| write_model(w, &model))?;
    run.write_json(
        "training.json",
        &TrainingReport {
            kind: model.kind.as_str(),
            task: model.task.as_str(),
            labels: &model.labels,
            vocab_size: model.vocab_len(),
        },
    )?;
    run.finish("train", a)
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut run = Run::new(&a.out)?;
    let bytes = run.read_bytes(&a.cohort)?;
    let split = a.split.into();
    let records: Vec<CohortRecord> = filter_datasets(&read_cohort(&bytes[..])?, a.dataset.datasets())
        .into_iter()
        .filter(|r| r.split == split)
        .collect();
    if records.is_empty() {
        return Err(Error::InsufficientData(format!("no cohort records in the {} split", split.as_str())));
    }
    let gold = gold_labels(&records, None);
    let users: BTreeSet<String> = gold.keys().cloned().collect();

    let predictions = match (&a.model, &a.predictions) {
        (Some(model_path), _) => {
            let model: Classifier = read_model(&run.read_bytes(model_path)?[..])?;
            let posts = a
                .posts
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("--model needs --posts".into()))?;
            let policy = load_policy(&mut run, &a.policy)?;
            let (all_users, _) = load_users(&mut run, posts, a.strict_window)?;
            let docs = cohort_docs(&records, &all_users, &policy)?;
            let predictions = model.predict(&docs, &users)?;
            run.write("predictions.jsonl", |w| write_predictions(w, &predictions))?;
            predictions
        }
        (None, Some(path)) => {
            let mut predictions = read_predictions(&run.read_bytes(path)?[..])?;
            predictions.retain(|p| users.contains(&p.user_id));
            predictions
        }
        (None, None) => return Err(Error::InvalidArgument("one of --model or --predictions is required".into())),
    };

    let scored: BTreeSet<_> = predictions.iter().flat_map(|p| p.scores.keys().copied()).collect();
    let mut subsets = binary_subsets(&records, None);
    subsets.retain(|c, _| scored.contains(c));
    let report = evaluate(&apply_threshold(&predictions, a.threshold), &gold, &subsets)?;
    run.write_json("eval.json", &report)?;
    run.finish("eval", a)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "micro_f1\t{:.2}", report.multi_label.f1)?;
    Ok(())
}
