//! Two-stage score normalisation: per-listener z-scores, then an affine map
//! per (story, question) that puts the reference system at mean 0, std 1.

use std::collections::BTreeMap;

use crate::error::{Result, StatsError};
use crate::scores::{Question, ScoreRecord, ScoreTable};

/// System ID of the copy-synthesis reference condition.
pub const REFERENCE_SYSTEM: &str = "AbS";

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn degenerate(mean: f64, std: f64) -> bool {
    !(std > 1e-12 * mean.abs().max(1.0))
}

/// Stage 1: z-score each listener over all of their answers (all questions pooled).
pub fn standardize_listeners(table: &ScoreTable) -> Result<ScoreTable> {
    if table.is_empty() {
        return Err(StatsError::Empty("score table"));
    }
    let mut by_listener: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in table.records() {
        by_listener.entry(r.listener.as_str()).or_default().push(r.score);
    }
    let mut params = BTreeMap::new();
    for (listener, scores) in &by_listener {
        let (m, s) = mean_std(scores);
        if degenerate(m, s) {
            return Err(StatsError::ZeroListenerVariance(listener.to_string()));
        }
        params.insert(*listener, (m, s));
    }
    let records = table
        .records()
        .iter()
        .map(|r| {
            let (m, s) = params[r.listener.as_str()];
            ScoreRecord { score: (r.score - m) / s, ..r.clone() }
        })
        .collect();
    ScoreTable::normalized(records)
}

/// Stage 2: for every (story, question) group, apply the affine map that gives
/// `reference`'s scores mean 0 and std 1 to all systems in the group.
pub fn anchor_to_reference(table: &ScoreTable, reference: &str) -> Result<ScoreTable> {
    if table.is_empty() {
        return Err(StatsError::Empty("score table"));
    }
    let mut groups: BTreeMap<(&str, Question), Vec<f64>> = BTreeMap::new();
    for r in table.records() {
        let e = groups.entry((r.story.as_str(), r.question)).or_default();
        if r.system == reference {
            e.push(r.score);
        }
    }
    let mut params = BTreeMap::new();
    for ((story, question), refs) in &groups {
        if refs.is_empty() {
            return Err(StatsError::MissingReference {
                reference: reference.to_string(),
                story: story.to_string(),
                question: question.to_string(),
            });
        }
        let (m, s) = mean_std(refs);
        if degenerate(m, s) {
            return Err(StatsError::ZeroReferenceVariance {
                reference: reference.to_string(),
                story: story.to_string(),
                question: question.to_string(),
            });
        }
        params.insert((*story, *question), (m, s));
    }
    let records = table
        .records()
        .iter()
        .map(|r| {
            let (m, s) = params[&(r.story.as_str(), r.question)];
            ScoreRecord { score: (r.score - m) / s, ..r.clone() }
        })
        .collect();
    ScoreTable::normalized(records)
}

/// Both stages with [`REFERENCE_SYSTEM`] as the anchor.
pub fn normalize_scores(raw: &ScoreTable) -> Result<ScoreTable> {
    normalize_scores_with(raw, REFERENCE_SYSTEM)
}

pub fn normalize_scores_with(raw: &ScoreTable, reference: &str) -> Result<ScoreTable> {
    let stage1 = standardize_listeners(raw)?;
    anchor_to_reference(&stage1, reference)
}
