use std::collections::{BTreeMap, BTreeSet};

use smhd_core::assets;
use smhd_core::mhfilter::is_mh_post;
use smhd_core::pattern::{find_triggers, match_conditions};
use smhd_core::pipeline::group_posts;
use smhd_core::synth::{generate, read_gold, ComorbidGroup, GapBand, GoldRole, SynthConfig};
use smhd_core::Condition::*;

fn config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        diagnosed: [(Depression, 12), (Adhd, 6), (Eating, 4)].into(),
        comorbid: vec![ComorbidGroup {
            conditions: vec![Anxiety, Ptsd],
            count: 3,
        }],
        controls: 60,
        negated: 3,
        sparse: 3,
        gaps: vec![
            GapBand {
                min: 1,
                max: 40,
                fraction: 0.75,
            },
            GapBand {
                min: 60,
                max: 60,
                fraction: 0.25,
            },
        ],
        shift_strength: 0.3,
        category_shifts: [("i".to_string(), 0.3)].into(),
        dev_posts: 40,
        dev_distractor_fraction: 0.25,
        ..SynthConfig::default()
    }
}

fn bytes(seed: u64) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let c = generate(&config(seed)).unwrap();
    let (mut p, mut g, mut d) = (Vec::new(), Vec::new(), Vec::new());
    c.write_posts(&mut p).unwrap();
    c.write_gold(&mut g).unwrap();
    c.write_dev(&mut d).unwrap();
    (p, g, d)
}

#[test]
fn same_seed_same_bytes() {
    assert_eq!(bytes(7), bytes(7));
    assert_ne!(bytes(7).0, bytes(8).0);
}

#[test]
fn gold_covers_every_user() {
    let c = generate(&config(1)).unwrap();
    let users = group_posts(c.posts.clone());
    let gold_ids: BTreeSet<&str> = c.gold.iter().map(|g| g.user_id.as_str()).collect();
    assert_eq!(gold_ids.len(), c.gold.len());
    assert_eq!(gold_ids, users.keys().map(String::as_str).collect());
    let roles: BTreeMap<GoldRole, usize> = c.gold.iter().fold(BTreeMap::new(), |mut m, g| {
        *m.entry(g.role).or_default() += 1;
        m
    });
    assert_eq!(roles[&GoldRole::Diagnosed], 25);
    assert_eq!(roles[&GoldRole::Control], 60);
    assert_eq!(roles[&GoldRole::Negated], 3);
    assert_eq!(roles[&GoldRole::Sparse], 3);
    let mut buf = Vec::new();
    c.write_gold(&mut buf).unwrap();
    assert_eq!(read_gold(&buf[..]).unwrap(), c.gold);
    for g in &c.gold {
        assert_eq!(g.role == GoldRole::Control, g.planted_gap_chars.is_none());
        assert_eq!(g.role == GoldRole::Control, g.category_shifts.is_empty());
    }
}

#[test]
fn controls_carry_no_mental_health_text() {
    let c = generate(&config(2)).unwrap();
    let policy = assets::policy().unwrap();
    let patterns = assets::patterns().unwrap();
    let lex = assets::lexicons().unwrap();
    let controls: BTreeSet<&str> =
        c.gold.iter().filter(|g| g.role == GoldRole::Control).map(|g| g.user_id.as_str()).collect();
    let mut seen = 0;
    for p in c.posts.iter().filter(|p| controls.contains(p.user_id.as_str())) {
        seen += 1;
        assert!(!is_mh_post(p, &policy), "{}", p.text);
        assert!(find_triggers(&p.text, &patterns).is_empty(), "{}", p.text);
        assert!(match_conditions(&p.id, &p.text, &patterns, &lex, usize::MAX).is_empty());
        assert!(!policy.removal_terms().matches(&p.text));
    }
    assert!(seen > 60 * 50);
}

#[test]
fn planted_gaps_measure_back() {
    let c = generate(&config(3)).unwrap();
    let patterns = assets::patterns().unwrap();
    let lex = assets::lexicons().unwrap();
    let users = group_posts(c.posts.clone());
    for g in c.gold.iter().filter(|g| g.role != GoldRole::Control) {
        let gap = g.planted_gap_chars.unwrap();
        let mut found: BTreeMap<_, usize> = BTreeMap::new();
        for p in users[&g.user_id].posts() {
            for m in match_conditions(&p.id, &p.text, &patterns, &lex, usize::MAX) {
                let e = found.entry(m.condition).or_insert(usize::MAX);
                *e = (*e).min(m.gap_chars);
            }
        }
        let expected: BTreeMap<_, usize> = g.conditions.iter().map(|&c| (c, gap)).collect();
        assert_eq!(found, expected, "{}", g.user_id);
    }
    let long = c.gold.iter().filter(|g| g.role == GoldRole::Diagnosed && g.planted_gap_chars == Some(60)).count();
    assert_eq!(long, 6, "a quarter of 25 rounds to 6");
}

#[test]
fn post_counts_follow_roles() {
    let c = generate(&config(4)).unwrap();
    let policy = assets::policy().unwrap();
    let users = group_posts(c.posts.clone());
    for g in &c.gold {
        let doc = &users[&g.user_id];
        let clean = doc.posts().iter().filter(|p| !is_mh_post(p, &policy)).count();
        match g.role {
            GoldRole::Sparse => assert!((40..=49).contains(&clean)),
            _ => assert!((51..=80).contains(&clean)),
        }
    }
}

#[test]
fn dev_posts_carry_distractors_beyond_the_gap() {
    let c = generate(&config(5)).unwrap();
    let patterns = assets::patterns().unwrap();
    let lex = assets::lexicons().unwrap();
    assert_eq!(c.dev.len(), 40);
    let mut distracted = 0;
    for d in &c.dev {
        let ms = match_conditions("dev", &d.text, &patterns, &lex, usize::MAX);
        let gold: Vec<_> = ms.iter().filter(|m| d.conditions.contains(&m.condition)).collect();
        assert_eq!(gold.len(), 1, "{}", d.text);
        if ms.len() > 1 {
            distracted += 1;
            assert!(ms.iter().filter(|m| !d.conditions.contains(&m.condition)).all(|m| m.gap_chars >= 50));
        }
    }
    assert_eq!(distracted, 10);
}

#[test]
fn infeasible_configs_are_rejected() {
    let mut c = config(0);
    c.posts_per_user = (30, 60);
    assert!(generate(&c).is_err());
    let mut c = config(0);
    c.keywords.remove(&Adhd);
    assert!(generate(&c).is_err());
}
