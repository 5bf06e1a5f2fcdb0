mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rakugo_stats::{
    anchor_to_reference, mean_std, normalize_scores, standardize_listeners, Question, ScoreRecord, ScoreTable, StatsError,
};

fn group_by<K: Ord>(t: &ScoreTable, key: impl Fn(&ScoreRecord) -> Option<K>) -> BTreeMap<K, Vec<f64>> {
    let mut m: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in t.records() {
        if let Some(k) = key(r) {
            m.entry(k).or_default().push(r.score);
        }
    }
    m
}

#[test]
fn stage_one_gives_each_listener_mean_zero_std_one() {
    let raw = common::simulated(24, 3, 1);
    let z = standardize_listeners(&raw).unwrap();
    for (l, v) in group_by(&z, |r| Some(r.listener.clone())) {
        let (m, s) = mean_std(&v);
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12, "{l}: mean {m} std {s}");
    }
}

#[test]
fn reference_has_mean_zero_std_one_per_story_and_question() {
    let raw = common::simulated(24, 3, 2);
    let n = normalize_scores(&raw).unwrap();
    let groups = group_by(&n, |r| (r.system == "AbS").then(|| (r.story.clone(), r.question)));
    assert_eq!(groups.len(), 3 * 4);
    for (k, v) in groups {
        let (m, s) = mean_std(&v);
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12, "{k:?}: mean {m} std {s}");
    }
}

#[test]
fn stage_two_is_one_affine_map_per_group() {
    let raw = common::simulated(24, 3, 3);
    let z = standardize_listeners(&raw).unwrap();
    let n = anchor_to_reference(&z, "AbS").unwrap();
    // hand recomputation of one group
    let refs: Vec<f64> =
        z.records().iter().filter(|r| r.story == "S1" && r.question == Question::Q2 && r.system == "AbS").map(|r| r.score).collect();
    let mean = refs.iter().sum::<f64>() / refs.len() as f64;
    let std = (refs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / refs.len() as f64).sqrt();
    for (a, b) in z.records().iter().zip(n.records()) {
        if a.story == "S1" && a.question == Question::Q2 {
            assert!((b.score - (a.score - mean) / std).abs() < 1e-12);
        }
    }
}

#[test]
fn listener_answering_all_fives_is_rejected() {
    let mut recs = common::simulated(8, 2, 4).records().to_vec();
    for r in recs.iter_mut().filter(|r| r.listener == "L03") {
        r.score = 5.0;
    }
    let raw = ScoreTable::raw(recs).unwrap();
    match standardize_listeners(&raw) {
        Err(StatsError::ZeroListenerVariance(l)) => assert_eq!(l, "L03"),
        other => panic!("expected zero-variance error, got {other:?}"),
    }
}

#[test]
fn missing_or_constant_reference_is_rejected() {
    let raw = common::simulated(8, 2, 5);
    let no_abs: Vec<ScoreRecord> = raw.records().iter().filter(|r| !(r.system == "AbS" && r.story == "S1")).cloned().collect();
    let t = standardize_listeners(&ScoreTable::raw(no_abs).unwrap()).unwrap();
    assert!(matches!(anchor_to_reference(&t, "AbS"), Err(StatsError::MissingReference { story, .. }) if story == "S1"));

    let mut recs = raw.records().to_vec();
    for r in recs.iter_mut().filter(|r| r.system == "AbS" && r.story == "S0" && r.question == Question::Q3) {
        r.score = 0.25;
    }
    let t = ScoreTable::normalized(recs).unwrap();
    assert!(matches!(anchor_to_reference(&t, "AbS"), Err(StatsError::ZeroReferenceVariance { story, .. }) if story == "S0"));
}

#[test]
fn raw_table_validation() {
    let r = |l: &str, s: f64| ScoreRecord::new(l, "S0", "AbS", Question::Q1, s);
    assert!(matches!(ScoreTable::raw(vec![r("a", 0.0)]), Err(StatsError::InvalidScore { .. })));
    assert!(matches!(ScoreTable::raw(vec![r("a", 3.5)]), Err(StatsError::InvalidScore { .. })));
    assert!(matches!(ScoreTable::raw(vec![r("a", 3.0), r("a", 4.0)]), Err(StatsError::DuplicateRecord { .. })));
    assert!(ScoreTable::raw(vec![r("a", 3.0), r("b", 4.0)]).is_ok());
}

proptest! {
    #[test]
    fn shifting_one_listener_leaves_stage_one_unchanged(seed in 0u64..1000, shift in -50.0f64..50.0, scale in 0.1f64..10.0) {
        let raw = common::simulated(8, 2, seed);
        let base = match standardize_listeners(&raw) { Ok(t) => t, Err(_) => return Ok(()) };
        let moved: Vec<ScoreRecord> = raw.records().iter().cloned().map(|mut r| {
            if r.listener == "L02" { r.score = r.score * scale + shift; }
            r
        }).collect();
        let moved = standardize_listeners(&ScoreTable::normalized(moved).unwrap()).unwrap();
        for (a, b) in base.records().iter().zip(moved.records()) {
            prop_assert!((a.score - b.score).abs() < 1e-9);
        }
    }

    #[test]
    fn stage_one_post_condition(seed in 0u64..1000) {
        let raw = common::simulated(10, 3, seed);
        if let Ok(z) = standardize_listeners(&raw) {
            for v in group_by(&z, |r| Some(r.listener.clone())).values() {
                let (m, s) = mean_std(v);
                prop_assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
            }
        }
    }
}
