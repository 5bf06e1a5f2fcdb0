use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{io_err, FrontendError, Result};
use crate::inventory::{tokenize_transcript, PhonemeClass, PhonemeId, PhonemeInventory, QSIL, SIL};
use crate::labels::ContextLabels;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const PARTITION_FILE: &str = "partitions.txt";
pub const MIN_DURATION: f64 = 0.5;
pub const MAX_DURATION: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub phonemes: Vec<PhonemeId>,
    pub labels: ContextLabels,
    /// Relative to the corpus directory.
    pub audio: Option<PathBuf>,
    pub duration: Option<f64>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, phonemes: Vec<PhonemeId>, labels: ContextLabels) -> Result<Self> {
        let u = Self { id: id.into(), phonemes, labels, audio: None, duration: None };
        u.validate()?;
        Ok(u)
    }

    /// Starts with `sil`, ends with `sil` or `qsil`, and has a non-pause
    /// symbol somewhere in between.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| FrontendError::InvalidUtterance { id: self.id.clone(), reason: reason.into() };
        if self.id.is_empty() || self.id.contains(['|', '\t', '\n']) || self.id.contains(char::is_whitespace) {
            return Err(bad("id must be non-empty without whitespace or `|`"));
        }
        if self.phonemes.first() != Some(&SIL) {
            return Err(bad("must begin with sil"));
        }
        if self.phonemes.len() < 3 || !matches!(self.phonemes.last(), Some(&SIL) | Some(&QSIL)) {
            return Err(bad("must end with sil or qsil"));
        }
        let inv = PhonemeInventory::standard();
        let inner = &self.phonemes[1..self.phonemes.len() - 1];
        if inner.iter().any(|&p| inv.class(p).is_none()) {
            return Err(bad("phoneme id out of range"));
        }
        if !inner.iter().any(|&p| inv.class(p) != Some(PhonemeClass::Pause)) {
            return Err(bad("no phonemes between the boundary pauses"));
        }
        Ok(())
    }

    pub fn symbols(&self) -> Vec<&'static str> {
        let inv = PhonemeInventory::standard();
        self.phonemes.iter().filter_map(|&p| inv.symbol(p)).collect()
    }

    pub fn is_question(&self) -> bool {
        self.phonemes.last() == Some(&QSIL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Partition::Train),
            "validation" | "valid" | "dev" => Some(Partition::Validation),
            "test" => Some(Partition::Test),
            _ => None,
        }
    }
}

/// Utterances plus their partition assignment. Each id maps to exactly one
/// partition, so partitions are disjoint by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub utterances: Vec<Utterance>,
    pub assignment: BTreeMap<String, Partition>,
}

impl CorpusManifest {
    pub fn new(utterances: Vec<Utterance>, assignment: BTreeMap<String, Partition>) -> Result<Self> {
        let m = Self { utterances, assignment };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for u in &self.utterances {
            u.validate()?;
            if !seen.insert(u.id.as_str()) {
                return Err(FrontendError::DuplicateId(u.id.clone()));
            }
            if !self.assignment.contains_key(&u.id) {
                return Err(FrontendError::Unassigned(u.id.clone()));
            }
        }
        if let Some(id) = self.assignment.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(FrontendError::UnknownUtterance(id.clone()));
        }
        Ok(())
    }

    pub fn partition_of(&self, id: &str) -> Option<Partition> {
        self.assignment.get(id).copied()
    }

    pub fn partition(&self, p: Partition) -> Vec<&Utterance> {
        self.utterances.iter().filter(|u| self.partition_of(&u.id) == Some(p)).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Checks that every referenced audio file exists under `root`.
    pub fn check_audio(&self, root: &Path) -> Result<()> {
        for u in &self.utterances {
            if let Some(a) = &u.audio {
                let p = root.join(a);
                if !p.is_file() {
                    return Err(FrontendError::MissingAudio(p));
                }
            }
        }
        Ok(())
    }

    /// `id|symbols|labels[|audio]`, one utterance per line.
    pub fn manifest_text(&self) -> String {
        let inv = PhonemeInventory::standard();
        let mut out = String::new();
        for u in &self.utterances {
            let _ = write!(out, "{}|{}|{}", u.id, inv.render(&u.phonemes), u.labels);
            if let Some(a) = &u.audio {
                let _ = write!(out, "|{}", a.display());
            }
            out.push('\n');
        }
        out
    }

    /// `id<TAB>partition`, one line per utterance in manifest order.
    pub fn partition_text(&self) -> String {
        let mut out = String::new();
        for u in &self.utterances {
            if let Some(p) = self.partition_of(&u.id) {
                let _ = writeln!(out, "{}\t{}", u.id, p.as_str());
            }
        }
        out
    }

    pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<Utterance>> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |reason: String| FrontendError::Parse { path: origin.to_path_buf(), line: n + 1, reason };
            let fields: Vec<&str> = line.split('|').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(perr(format!("expected 3 or 4 `|`-separated fields, got {}", fields.len())));
            }
            let phonemes = tokenize_transcript(fields[1]).map_err(|e| perr(e.to_string()))?;
            let labels = ContextLabels::parse(fields[2]).map_err(|e| perr(e.to_string()))?;
            let mut u = Utterance::new(fields[0].trim(), phonemes, labels).map_err(|e| perr(e.to_string()))?;
            u.audio = fields.get(3).map(|a| PathBuf::from(a.trim())).filter(|a| !a.as_os_str().is_empty());
            out.push(u);
        }
        Ok(out)
    }

    pub fn parse_partitions(text: &str, origin: &Path) -> Result<BTreeMap<String, Partition>> {
        let mut out = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |reason: String| FrontendError::Parse { path: origin.to_path_buf(), line: n + 1, reason };
            let mut it = line.split_whitespace();
            let (Some(id), Some(p), None) = (it.next(), it.next(), it.next()) else {
                return Err(perr("expected `id partition`".into()));
            };
            let p = Partition::parse(p).ok_or_else(|| perr(format!("unknown partition `{p}`")))?;
            if out.insert(id.to_string(), p).is_some() {
                return Err(perr(format!("`{id}` assigned twice")));
            }
        }
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let m = dir.join(MANIFEST_FILE);
        std::fs::write(&m, self.manifest_text()).map_err(io_err(&m))?;
        let p = dir.join(PARTITION_FILE);
        std::fs::write(&p, self.partition_text()).map_err(io_err(&p))?;
        Ok(())
    }

    /// Reads `manifest.txt` and `partitions.txt` from `dir` and checks the audio references.
    pub fn load(dir: &Path) -> Result<Self> {
        let m = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&m).map_err(io_err(&m))?;
        let utterances = Self::parse_manifest(&text, &m)?;
        let p = dir.join(PARTITION_FILE);
        let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
        let manifest = Self::new(utterances, Self::parse_partitions(&text, &p)?)?;
        manifest.check_audio(dir)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub manifest: CorpusManifest,
    /// `(id, duration)` of every dropped utterance.
    pub removed: Vec<(String, f64)>,
}

/// Drops training and validation utterances shorter than 0.5 s or at least
/// 20 s long. Test utterances are never touched and need no duration.
pub fn filter_utterances(manifest: &CorpusManifest, durations: &HashMap<String, f64>) -> Result<FilterOutcome> {
    let mut kept = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut removed = Vec::new();
    for u in &manifest.utterances {
        let part = manifest.partition_of(&u.id).ok_or_else(|| FrontendError::Unassigned(u.id.clone()))?;
        if part != Partition::Test {
            let d = durations
                .get(&u.id)
                .copied()
                .or(u.duration)
                .ok_or_else(|| FrontendError::MissingDuration(u.id.clone()))?;
            if !(MIN_DURATION..MAX_DURATION).contains(&d) {
                log::info!("dropping {} ({}, {d:.3} s)", u.id, part.as_str());
                removed.push((u.id.clone(), d));
                continue;
            }
        }
        assignment.insert(u.id.clone(), part);
        kept.push(u.clone());
    }
    Ok(FilterOutcome { manifest: CorpusManifest { utterances: kept, assignment }, removed })
}
