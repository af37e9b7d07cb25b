//! Corpus construction and analysis for self-reported mental health diagnoses.
//!
//! The pipeline runs in stages that mirror how the dataset is assembled:
//!
//! 1. [`corpus`] streams an NDJSON post dump into per-user documents.
//! 2. [`pattern`] finds self-reported diagnosis statements and the condition
//!    keywords near them.
//! 3. [`mhfilter`] removes mental-health posts from every user.
//! 4. [`cohort`] selects diagnosed users, matches controls and partitions the
//!    result into the main and relaxed-control datasets.
//! 5. [`stats`], [`psycholing`] and [`classify`] describe and model the
//!    resulting cohort.
//!
//! [`synth`] generates seeded corpora with planted ground truth so that every
//! stage can be checked without access to real data.

pub mod assets;
pub mod classify;
pub mod cohort;
pub mod condition;
pub mod corpus;
mod error;
pub mod metrics;
pub mod mhfilter;
pub mod pattern;
pub mod pipeline;
pub mod psycholing;
pub mod stats;
pub mod synth;
pub mod text;

pub use condition::Condition;
pub use corpus::{Post, UserDoc};
pub use error::{Error, Result};
pub use text::tokenize;
