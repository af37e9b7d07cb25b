//! Default pattern, lexicon and policy assets bundled with the crate.
//!
//! These are curated approximations meant as starting points; every CLI
//! command accepts replacements.

use crate::mhfilter::MhPolicy;
use crate::pattern::{compile_patterns, Lexicons, PatternSet};
use crate::psycholing::CategoryLexicon;
use crate::Result;

pub const PATTERNS: &str = include_str!("../assets/patterns.txt");
pub const LEXICONS: &str = include_str!("../assets/lexicons.json");
pub const MH_SUBREDDITS: &str = include_str!("../assets/mh_subreddits.txt");
pub const MH_TERMS: &str = include_str!("../assets/mh_terms.txt");
pub const REMOVAL_TERMS: &str = include_str!("../assets/removal_terms.txt");
pub const CATEGORIES: &str = include_str!("../assets/categories.tsv");

pub fn patterns() -> Result<PatternSet> {
    Ok(compile_patterns(PATTERNS)?)
}

pub fn lexicons() -> Result<Lexicons> {
    Lexicons::from_json(LEXICONS)
}

pub fn policy() -> Result<MhPolicy> {
    MhPolicy::from_lists(MH_SUBREDDITS, MH_TERMS, REMOVAL_TERMS)
}

pub fn categories() -> Result<CategoryLexicon> {
    CategoryLexicon::from_tsv(CATEGORIES)
}
