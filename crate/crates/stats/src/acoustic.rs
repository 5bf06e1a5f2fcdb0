//! Per-system pitch and speaking-rate variability, optionally related to
//! mean normalised scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rakugo_dsp::{f0_cov, rate_cov, F0Track};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::regression::{ols_regression, pearson_r, Regression};
use crate::scores::{Question, ScoreTable};

/// Acoustic measurements for one system's stimuli.
#[derive(Debug, Clone)]
pub struct SystemAcoustics {
    pub system: String,
    pub f0_tracks: Vec<F0Track>,
    /// Morae per second, one per utterance.
    pub speech_rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Measure {
    F0Cov,
    RateCov,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::F0Cov, Measure::RateCov];

    pub fn name(self) -> &'static str {
        match self {
            Measure::F0Cov => "f0_cov",
            Measure::RateCov => "rate_cov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovRow {
    pub system: String,
    pub f0_cov: f64,
    pub rate_cov: f64,
    /// Mean normalised score per question, when scores were supplied.
    pub mean_scores: BTreeMap<Question, f64>,
}

impl CovRow {
    pub fn value(&self, m: Measure) -> f64 {
        match m {
            Measure::F0Cov => self.f0_cov,
            Measure::RateCov => self.rate_cov,
        }
    }
}

/// Correlation and fit of one measure against one question's mean scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub measure: Measure,
    pub question: Question,
    /// Systems entering the fit (reference excluded).
    pub systems: Vec<String>,
    pub correlation: Option<f64>,
    pub regression: Option<Regression>,
    /// Why the correlation or fit is missing.
    pub undefined: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticReport {
    pub reference: String,
    pub rows: Vec<CovRow>,
    pub associations: Vec<Association>,
}

impl AcousticReport {
    pub fn row(&self, system: &str) -> Option<&CovRow> {
        self.rows.iter().find(|r| r.system == system)
    }

    pub fn entries(&self) -> Vec<CovEntry> {
        self.rows.iter().map(|r| CovEntry { system: r.system.clone(), f0_cov: r.f0_cov, rate_cov: r.rate_cov }).collect()
    }
}

/// Variability of one system's stimuli, as stored in `acoustic_cov.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub system: String,
    pub f0_cov: f64,
    pub rate_cov: f64,
}

pub fn cov_entries(systems: &[SystemAcoustics]) -> Result<Vec<CovEntry>> {
    systems
        .iter()
        .map(|s| Ok(CovEntry { system: s.system.clone(), f0_cov: f0_cov(&s.f0_tracks)?, rate_cov: rate_cov(&s.speech_rates)? }))
        .collect()
}

pub fn write_cov_csv(entries: &[CovEntry], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in entries {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cov_csv(reader: impl Read) -> Result<Vec<CovEntry>> {
    let mut r = csv::Reader::from_reader(reader);
    let entries = r.deserialize().collect::<std::result::Result<Vec<CovEntry>, _>>()?;
    if entries.iter().any(|e| !e.f0_cov.is_finite() || !e.rate_cov.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(entries)
}

pub fn load_cov_csv(path: impl AsRef<Path>) -> Result<Vec<CovEntry>> {
    read_cov_csv(std::fs::File::open(path)?)
}

/// CoV table per system. With `scores`, each measure is correlated and
/// regressed against each question's per-system mean, leaving out `reference`.
pub fn acoustic_report(systems: &[SystemAcoustics], scores: Option<&ScoreTable>, reference: &str) -> Result<AcousticReport> {
    report_from_cov(&cov_entries(systems)?, scores, reference)
}

/// [`acoustic_report`] from CoV values measured earlier.
pub fn report_from_cov(entries: &[CovEntry], scores: Option<&ScoreTable>, reference: &str) -> Result<AcousticReport> {
    if entries.is_empty() {
        return Err(StatsError::Empty("system set"));
    }
    let means: BTreeMap<Question, BTreeMap<String, f64>> = match scores {
        Some(t) => Question::ALL.iter().map(|&q| (q, t.system_means(q))).collect(),
        None => BTreeMap::new(),
    };
    let mut rows = Vec::with_capacity(entries.len());
    for e in entries {
        let mean_scores = means.iter().filter_map(|(q, m)| m.get(&e.system).map(|v| (*q, *v))).collect();
        rows.push(CovRow { system: e.system.clone(), f0_cov: e.f0_cov, rate_cov: e.rate_cov, mean_scores });
    }
    let mut associations = Vec::new();
    if scores.is_some() {
        for measure in Measure::ALL {
            for q in Question::ALL {
                let used: Vec<&CovRow> =
                    rows.iter().filter(|r| r.system != reference && r.mean_scores.contains_key(&q)).collect();
                if used.is_empty() {
                    continue;
                }
                let x: Vec<f64> = used.iter().map(|r| r.value(measure)).collect();
                let y: Vec<f64> = used.iter().map(|r| r.mean_scores[&q]).collect();
                let (correlation, regression, undefined) = match (pearson_r(&x, &y), ols_regression(&x, &y)) {
                    (Ok(r), Ok(f)) => (Some(r), Some(f), None),
                    (Err(e), Ok(f)) => (None, Some(f), Some(e.to_string())),
                    (Ok(r), Err(e)) => (Some(r), None, Some(e.to_string())),
                    (Err(e), Err(_)) => (None, None, Some(e.to_string())),
                };
                associations.push(Association {
                    measure,
                    question: q,
                    systems: used.iter().map(|r| r.system.clone()).collect(),
                    correlation,
                    regression,
                    undefined,
                });
            }
        }
    }
    Ok(AcousticReport { reference: reference.to_string(), rows, associations })
}
