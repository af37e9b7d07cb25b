//! Post and user data model, plus streaming NDJSON ingestion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::text;

/// 2006-01-01T00:00:00Z.
pub const WINDOW_START: i64 = 1_136_073_600;
/// 2017-12-31T23:59:59Z.
pub const WINDOW_END: i64 = 1_514_764_799;

const BATCH_LINES: usize = 8192;

/// One social media post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub user_id: String,
    pub subreddit: String,
    pub created_utc: i64,
    pub text: String,
}

impl Post {
    fn sort_key(&self) -> (i64, &str, &str, &str) {
        (self.created_utc, &self.id, &self.subreddit, &self.text)
    }
}

/// Why a line was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Not a JSON object, a required key is missing, or a value has the wrong type.
    Schema,
    /// Timestamp outside the collection window (strict mode only).
    Window,
    /// A required string field is empty.
    EmptyField,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Schema => "schema",
            RejectReason::Window => "window",
            RejectReason::EmptyField => "empty_field",
        }
    }
}

fn string_field(raw: &Map<String, Value>, key: &str) -> Result<String, RejectReason> {
    match raw.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        _ => Err(RejectReason::Schema),
    }
}

/// Turns one parsed line into a [`Post`], or the single reason it fails.
///
/// Schema problems are reported before empty fields, and empty fields before
/// the timestamp window. Unknown keys are ignored. Subreddit names are
/// lowercased.
pub fn validate_post(raw: &Map<String, Value>, strict_window: bool) -> Result<Post, RejectReason> {
    let id = string_field(raw, "id")?;
    let user_id = string_field(raw, "user_id")?;
    let subreddit = string_field(raw, "subreddit")?;
    let text = string_field(raw, "text")?;
    let created_utc = raw
        .get("created_utc")
        .and_then(Value::as_i64)
        .ok_or(RejectReason::Schema)?;

    if id.is_empty() || user_id.is_empty() || subreddit.trim().is_empty() || text.is_empty() {
        return Err(RejectReason::EmptyField);
    }
    if strict_window && !(WINDOW_START..=WINDOW_END).contains(&created_utc) {
        return Err(RejectReason::Window);
    }
    Ok(Post {
        id,
        user_id,
        subreddit: subreddit.trim().to_lowercase(),
        created_utc,
        text,
    })
}

fn parse_line(line: &[u8], strict_window: bool) -> Result<Post, RejectReason> {
    let raw: Value = serde_json::from_slice(line).map_err(|_| RejectReason::Schema)?;
    match raw {
        Value::Object(map) => validate_post(&map, strict_window),
        _ => Err(RejectReason::Schema),
    }
}

/// All posts of one user in chronological order, with cached counts.
///
/// Immutable once built; the counts always agree with `posts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserDoc {
    user_id: String,
    posts: Vec<Post>,
    post_tokens: Vec<usize>,
    token_count: usize,
    char_count: usize,
    subreddits: BTreeSet<String>,
}

impl UserDoc {
    /// Builds a document from posts in any order. Posts are sorted by
    /// timestamp, then id, subreddit and text.
    pub fn new(user_id: impl Into<String>, mut posts: Vec<Post>) -> Self {
        let user_id = user_id.into();
        debug_assert!(posts.iter().all(|p| p.user_id == user_id));
        posts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let post_tokens: Vec<usize> = posts.iter().map(|p| text::token_count(&p.text)).collect();
        UserDoc {
            token_count: post_tokens.iter().sum(),
            char_count: posts.iter().map(|p| text::char_len(&p.text)).sum(),
            subreddits: posts.iter().map(|p| p.subreddit.clone()).collect(),
            post_tokens,
            posts,
            user_id,
        }
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn post_count(&self) -> usize {
        self.posts.len()
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Token count of each post, aligned with [`UserDoc::posts`].
    pub fn post_token_counts(&self) -> &[usize] {
        &self.post_tokens
    }

    pub fn char_count(&self) -> usize {
        self.char_count
    }

    pub fn subreddits(&self) -> &BTreeSet<String> {
        &self.subreddits
    }

    /// A new document holding only the posts that satisfy `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&Post) -> bool) -> UserDoc {
        let posts = self.posts.iter().filter(|p| keep(p)).cloned().collect();
        UserDoc::new(self.user_id.clone(), posts)
    }

    /// All tokens of all posts, in post order.
    pub fn tokens(&self) -> Vec<String> {
        self.posts.iter().flat_map(|p| text::tokenize(&p.text)).collect()
    }
}

/// Line counts from one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub rejected_by_reason: BTreeMap<RejectReason, u64>,
}

impl IngestReport {
    fn record(&mut self, outcome: &Result<Post, RejectReason>) {
        self.lines_read += 1;
        match outcome {
            Ok(_) => self.accepted += 1,
            Err(reason) => {
                self.rejected += 1;
                *self.rejected_by_reason.entry(*reason).or_default() += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub strict_window: bool,
}

/// Result of [`ingest_posts`].
#[derive(Debug, Default)]
pub struct Ingested {
    pub users: BTreeMap<String, UserDoc>,
    pub report: IngestReport,
}

/// Streams an NDJSON dump into per-user documents.
///
/// Lines that are empty or whitespace-only are skipped and not counted.
/// Every other line is either accepted or rejected with a reason; a bad
/// line never aborts the stream. Lines are parsed in batches on the current
/// rayon pool; the result does not depend on batch size, thread count or
/// line order.
pub fn ingest_posts<R: BufRead>(mut reader: R, opts: IngestOptions) -> io::Result<Ingested> {
    let mut report = IngestReport::default();
    let mut by_user: HashMap<String, Vec<Post>> = HashMap::new();
    let mut batch: Vec<Vec<u8>> = Vec::with_capacity(BATCH_LINES);
    let mut done = false;

    while !done {
        batch.clear();
        while batch.len() < BATCH_LINES {
            let mut line = Vec::new();
            if reader.read_until(b'\n', &mut line)? == 0 {
                done = true;
                break;
            }
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            batch.push(line);
        }
        let parsed: Vec<Result<Post, RejectReason>> = batch
            .par_iter()
            .map(|line| parse_line(line, opts.strict_window))
            .collect();
        for outcome in parsed {
            report.record(&outcome);
            if let Ok(post) = outcome {
                by_user.entry(post.user_id.clone()).or_default().push(post);
            }
        }
    }

    let users = by_user
        .into_par_iter()
        .map(|(user, posts)| {
            let doc = UserDoc::new(user.clone(), posts);
            (user, doc)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(Ingested { users, report })
}

/// Opens a post dump, transparently decompressing gzip input.
pub fn open_posts(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = BufReader::new(File::open(path)?);
    let is_gzip = file.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    if is_gzip {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Reads a whole reader into a string, decompressing gzip if needed.
pub fn read_maybe_gzip(mut reader: impl Read) -> io::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&bytes[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Serializes posts as NDJSON, one object per line.
pub fn write_posts<W: io::Write>(mut out: W, posts: &[Post]) -> io::Result<()> {
    for post in posts {
        serde_json::to_writer(&mut out, post)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
