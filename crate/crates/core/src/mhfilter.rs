//! Mental-health post detection and per-user scrubbing.

use std::collections::BTreeSet;

use crate::corpus::{Post, UserDoc};
use crate::text::{self, PhraseSet};
use crate::{Error, Result};

/// Which posts count as mental-health content, plus terms whose presence
/// removes a post without marking it as mental-health content.
#[derive(Debug, Clone)]
pub struct MhPolicy {
    mh_subreddits: BTreeSet<String>,
    mh_terms: PhraseSet,
    removal_terms: PhraseSet,
}

impl MhPolicy {
    pub fn new<S, T, R>(subreddits: S, mh_terms: T, removal_terms: R) -> Result<Self>
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        T: IntoIterator,
        T::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        let mh_subreddits: BTreeSet<String> = subreddits
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        if mh_subreddits.is_empty() {
            return Err(Error::asset("mh_subreddits", "no subreddits"));
        }
        let mh_terms = PhraseSet::new(mh_terms)?;
        if mh_terms.is_empty() {
            return Err(Error::asset("mh_terms", "no terms"));
        }
        Ok(MhPolicy {
            mh_subreddits,
            mh_terms,
            removal_terms: PhraseSet::new(removal_terms)?,
        })
    }

    /// Builds a policy from the contents of three line-oriented list files.
    pub fn from_lists(subreddits: &str, mh_terms: &str, removal_terms: &str) -> Result<Self> {
        MhPolicy::new(
            parse_list(subreddits),
            parse_list(mh_terms),
            parse_list(removal_terms),
        )
    }

    pub fn mh_subreddits(&self) -> &BTreeSet<String> {
        &self.mh_subreddits
    }

    pub fn mh_terms(&self) -> &PhraseSet {
        &self.mh_terms
    }

    pub fn removal_terms(&self) -> &PhraseSet {
        &self.removal_terms
    }
}

/// One entry per non-empty line; `#` starts a comment line.
pub fn parse_list(body: &str) -> Vec<String> {
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(text::normalize_phrase)
        .collect()
}

/// True when the post was made to a mental-health subreddit or mentions a
/// mental-health term.
pub fn is_mh_post(post: &Post, policy: &MhPolicy) -> bool {
    policy.mh_subreddits.contains(&post.subreddit) || policy.mh_terms.matches(&post.text)
}

pub fn has_removal_term(post: &Post, policy: &MhPolicy) -> bool {
    policy.removal_terms.matches(&post.text)
}

/// Drops mental-health posts and posts containing a removal term.
pub fn scrub_user(doc: &UserDoc, policy: &MhPolicy) -> UserDoc {
    doc.filtered(|p| !is_mh_post(p, policy) && !has_removal_term(p, policy))
}

/// Drops only posts containing a removal term.
pub fn strip_removal_terms(doc: &UserDoc, policy: &MhPolicy) -> UserDoc {
    doc.filtered(|p| !has_removal_term(p, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy() -> MhPolicy {
        MhPolicy::new(
            ["depression_help", "ADHD"],
            ["suffering from", "diagnosis", "mental illness", "ocd"],
            ["add"],
        )
        .unwrap()
    }

    fn post(id: &str, sub: &str, text: &str) -> Post {
        Post {
            id: id.into(),
            user_id: "u".into(),
            subreddit: sub.into(),
            created_utc: id.len() as i64,
            text: text.into(),
        }
    }

    #[test]
    fn subreddit_rule() {
        assert!(is_mh_post(&post("1", "depression_help", "cats!"), &policy()));
        assert!(is_mh_post(&post("1", "adhd", "cats!"), &policy()));
    }

    #[test]
    fn term_rule() {
        let p = policy();
        assert!(is_mh_post(&post("1", "aww", "I am suffering from insomnia"), &p));
        assert!(is_mh_post(&post("1", "aww", "my OCD again"), &p));
        assert!(!is_mh_post(&post("1", "aww", "I like addition problems"), &p));
    }

    #[test]
    fn scrub_removes_mh_and_add_posts() {
        let p = policy();
        let doc = UserDoc::new(
            "u",
            vec![
                post("a", "aww", "cute cat"),
                post("bb", "adhd", "focus"),
                post("ccc", "cooking", "just add salt"),
                post("dddd", "news", "election day"),
            ],
        );
        let clean = scrub_user(&doc, &p);
        let ids: Vec<&str> = clean.posts().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "dddd"]);
        assert_eq!(clean.subreddits().len(), 2);
        let stripped = strip_removal_terms(&doc, &p);
        assert_eq!(stripped.post_count(), 3);
    }

    #[test]
    fn scrub_is_identity_without_mh_content() {
        let doc = UserDoc::new("u", vec![post("a", "aww", "cute"), post("b", "news", "vote")]);
        assert_eq!(scrub_user(&doc, &policy()), doc);
    }

    #[test]
    fn lists_skip_comments() {
        let items = parse_list("# header\nDepression\n\n  mental   illness \n");
        assert_eq!(items, vec!["depression", "mental illness"]);
        assert!(MhPolicy::from_lists("", "x", "").is_err());
        assert!(MhPolicy::from_lists("a", "# none", "").is_err());
        assert!(MhPolicy::from_lists("a", "b", "").is_ok());
    }

    proptest! {
        #[test]
        fn scrub_invariants(texts in proptest::collection::vec(("[a-z ]{0,30}", "(aww|adhd|news)"), 0..20)) {
            let p = policy();
            let posts: Vec<Post> = texts
                .iter()
                .enumerate()
                .map(|(i, (t, s))| {
                    let words = ["add", "diagnosis", "fine", "suffering from"];
                    post(&format!("p{i}"), s, &format!("{t} {}", words[i % 4]))
                })
                .collect();
            let doc = UserDoc::new("u", posts);
            let once = scrub_user(&doc, &p);
            prop_assert_eq!(&scrub_user(&once, &p), &once);
            for post in once.posts() {
                prop_assert!(!is_mh_post(post, &p));
                prop_assert!(!has_removal_term(post, &p));
            }
            prop_assert!(once.post_count() <= doc.post_count());
            prop_assert!(once.token_count() <= doc.token_count());
            prop_assert!(once.char_count() <= doc.char_count());
        }
    }
}
