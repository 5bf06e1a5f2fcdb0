//! Listening-test answers and their CSV form.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

/// The four MOS questions asked per story.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Question {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Question {
    pub const ALL: [Question; 4] = [Question::Q1, Question::Q2, Question::Q3, Question::Q4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.index() + 1)
    }
}

impl FromStr for Question {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix(['Q', 'q']).unwrap_or(t);
        match digits {
            "1" => Ok(Question::Q1),
            "2" => Ok(Question::Q2),
            "3" => Ok(Question::Q3),
            "4" => Ok(Question::Q4),
            _ => Err(StatsError::UnknownQuestion(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub listener: String,
    pub story: String,
    pub system: String,
    pub question: Question,
    pub score: f64,
}

impl ScoreRecord {
    pub fn new(listener: impl Into<String>, story: impl Into<String>, system: impl Into<String>, question: Question, score: f64) -> Self {
        Self { listener: listener.into(), story: story.into(), system: system.into(), question, score }
    }
}

/// Whether scores are raw 1-5 ratings or already normalised reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Raw,
    Normalized,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    listener: String,
    story: String,
    system: String,
    question: String,
    score: f64,
}

/// A set of answers with at most one record per (listener, story, question).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    scale: Scale,
    records: Vec<ScoreRecord>,
}

impl ScoreTable {
    /// Raw table; every score must be one of 1, 2, 3, 4, 5.
    pub fn raw(records: Vec<ScoreRecord>) -> Result<Self> {
        for (index, r) in records.iter().enumerate() {
            let s = r.score;
            if !(1.0..=5.0).contains(&s) || s.fract() != 0.0 {
                return Err(StatsError::InvalidScore { index, value: s });
            }
        }
        Self::build(Scale::Raw, records)
    }

    pub fn normalized(records: Vec<ScoreRecord>) -> Result<Self> {
        for (index, r) in records.iter().enumerate() {
            if !r.score.is_finite() {
                return Err(StatsError::NonFiniteScore { index });
            }
        }
        Self::build(Scale::Normalized, records)
    }

    fn build(scale: Scale, records: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert((&r.listener, &r.story, r.question)) {
                return Err(StatsError::DuplicateRecord {
                    listener: r.listener.clone(),
                    story: r.story.clone(),
                    question: r.question.to_string(),
                });
            }
        }
        Ok(Self { scale, records })
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct system IDs in sorted order.
    pub fn systems(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.system.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn listeners(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.listener.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Scores given to `system` for `question`, in record order.
    pub fn scores(&self, system: &str, question: Question) -> Vec<f64> {
        self.records.iter().filter(|r| r.system == system && r.question == question).map(|r| r.score).collect()
    }

    /// Mean score per system for one question.
    pub fn system_means(&self, question: Question) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.question == question) {
            let e = acc.entry(r.system.clone()).or_insert((0.0, 0));
            e.0 += r.score;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn read_csv(reader: impl Read, scale: Scale) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            let question = row.question.parse()?;
            records.push(ScoreRecord { listener: row.listener, story: row.story, system: row.system, question, score: row.score });
        }
        match scale {
            Scale::Raw => Self::raw(records),
            Scale::Normalized => Self::normalized(records),
        }
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(CsvRow {
                listener: r.listener.clone(),
                story: r.story.clone(),
                system: r.system.clone(),
                question: r.question.to_string(),
                score: r.score,
            })?;
        }
        if self.records.is_empty() {
            w.write_record(["listener", "story", "system", "question", "score"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, scale: Scale) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, scale)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
