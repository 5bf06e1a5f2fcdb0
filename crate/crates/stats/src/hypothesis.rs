//! Brunner-Munzel rank test and Bonferroni correction.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, StatsError};
use crate::scores::{Question, ScoreTable};

/// Pairs among 13 conditions.
pub const DEFAULT_COMPARISONS: usize = 78;

/// Significance thresholds reported with each corrected p-value.
pub const SIGNIFICANCE_LEVELS: [f64; 3] = [0.01, 0.005, 0.001];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrunnerMunzel {
    pub statistic: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_value: f64,
    /// Estimate of P(X < Y) + P(X = Y) / 2.
    pub relative_effect: f64,
}

/// Midranks (ties share the average of their positions), 1-based.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-sided Brunner-Munzel test. A positive statistic means `y` tends to be larger.
pub fn brunner_munzel(x: &[f64], y: &[f64]) -> Result<BrunnerMunzel> {
    let (nx, ny) = (x.len(), y.len());
    if nx < 2 || ny < 2 {
        return Err(StatsError::TooFewValues { need: 2, got: nx.min(ny) });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let combined: Vec<f64> = x.iter().chain(y).copied().collect();
    let rc = midranks(&combined);
    let (rcx, rcy) = rc.split_at(nx);
    let rx = midranks(x);
    let ry = midranks(y);
    let (mcx, mcy) = (mean(rcx), mean(rcy));
    let (fx, fy) = (nx as f64, ny as f64);

    let s = |rc: &[f64], r: &[f64], mc: f64, n: f64| {
        rc.iter().zip(r).map(|(c, w)| (c - w - mc + (n + 1.0) / 2.0).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let sx = s(rcx, &rx, mcx, fx);
    let sy = s(rcy, &ry, mcy, fy);
    if sx == 0.0 && sy == 0.0 {
        return Err(StatsError::DegenerateRanks);
    }

    let (vx, vy) = (fx * sx, fy * sy);
    let statistic = fx * fy * (mcy - mcx) / ((fx + fy) * (vx + vy).sqrt());
    let df = (vx + vy).powi(2) / (vx * vx / (fx - 1.0) + vy * vy / (fy - 1.0));
    let t = StudentsT::new(0.0, 1.0, df).map_err(|_| StatsError::DegenerateRanks)?;
    let p_value = (2.0 * t.cdf(statistic).min(t.sf(statistic))).min(1.0);
    let relative_effect = (mcy - mcx) / (fx + fy) + 0.5;
    Ok(BrunnerMunzel { statistic, df, p_value, relative_effect })
}

/// min(1, m * p) for each p. An `m` below the number of p-values is raised to it.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    let m = m.max(p_values.len()) as f64;
    p_values.iter().map(|p| (m * p).min(1.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub system_x: String,
    pub system_y: String,
    pub question: Question,
    pub statistic: f64,
    pub p_raw: f64,
    pub p_corrected: f64,
    /// One flag per entry of [`SIGNIFICANCE_LEVELS`].
    pub significant: [bool; 3],
}

impl TestResult {
    pub fn new(system_x: &str, system_y: &str, question: Question, bm: &BrunnerMunzel, m: usize) -> Self {
        let p_corrected = bonferroni(&[bm.p_value], m)[0];
        Self {
            system_x: system_x.to_string(),
            system_y: system_y.to_string(),
            question,
            statistic: bm.statistic,
            p_raw: bm.p_value,
            p_corrected,
            significant: SIGNIFICANCE_LEVELS.map(|a| p_corrected < a),
        }
    }

    /// Number of thresholds passed, as drawn with stars.
    pub fn stars(&self) -> usize {
        self.significant.iter().filter(|s| **s).count()
    }
}

/// Brunner-Munzel on every unordered pair of `systems` for each question,
/// corrected with family size `m`.
pub fn pairwise_tests(table: &ScoreTable, systems: &[String], questions: &[Question], m: usize) -> Result<Vec<TestResult>> {
    let mut out = Vec::new();
    for &q in questions {
        for (i, a) in systems.iter().enumerate() {
            for b in &systems[i + 1..] {
                let bm = brunner_munzel(&table.scores(a, q), &table.scores(b, q))?;
                out.push(TestResult::new(a, b, q, &bm, m));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct ResultRow<'a> {
    system_x: &'a str,
    system_y: &'a str,
    question: String,
    statistic: f64,
    p_raw: f64,
    p_corrected: f64,
    sig_01: bool,
    sig_005: bool,
    sig_001: bool,
}

pub fn write_results_csv(results: &[TestResult], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(ResultRow {
            system_x: &r.system_x,
            system_y: &r.system_y,
            question: r.question.to_string(),
            statistic: r.statistic,
            p_raw: r.p_raw,
            p_corrected: r.p_corrected,
            sig_01: r.significant[0],
            sig_005: r.significant[1],
            sig_001: r.significant[2],
        })?;
    }
    w.flush()?;
    Ok(())
}
