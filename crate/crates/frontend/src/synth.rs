//! Deterministic stand-in corpus. Voiced phonemes are a harmonic series of
//! the current pitch shaped by a phoneme-specific formant pair; pauses and
//! `cl` are silent. Labels set pitch register, loudness and
//! speaking rate, so conditioning on them is learnable.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rakugo_dsp::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusManifest, Partition, Utterance};
use crate::error::{io_err, FrontendError, Result};
use crate::inventory::{PhonemeClass, PhonemeId, PhonemeInventory, CONSONANTS, PAU, QSIL, SIL};
use crate::labels::{ContextLabels, LabelField};

pub const DEFAULT_PHONEME_SECONDS: f64 = 0.08;
const NOISE_FLOOR: f64 = 1e-3;
const FADE_SECONDS: f64 = 0.005;
const SOURCE_TOP_HZ: f64 = 4000.0;
const QUESTION_RATIO: f64 = 0.3;
const VOWEL_FORMANTS: [(f64, f64); 5] = [(800.0, 1250.0), (500.0, 1850.0), (300.0, 2250.0), (500.0, 900.0), (350.0, 1350.0)];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusConfig {
    pub seed: u64,
    pub n_utterances: usize,
    /// Symbols between the boundary pauses.
    pub phonemes: RangeInclusive<usize>,
    pub sample_rate: u32,
    pub phoneme_seconds: f64,
    /// Vary only gender and age, which set the pitch register; every other
    /// label except `part` keeps its default.
    pub register_only: bool,
}

impl SyntheticCorpusConfig {
    pub fn new(seed: u64, n_utterances: usize, phonemes: RangeInclusive<usize>) -> Self {
        Self {
            seed,
            n_utterances,
            phonemes,
            sample_rate: 16_000,
            phoneme_seconds: DEFAULT_PHONEME_SECONDS,
            register_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub manifest: CorpusManifest,
    /// Aligned with `manifest.utterances`.
    pub waveforms: Vec<Waveform>,
}

impl SyntheticCorpus {
    /// Writes the manifest, the partition file and `wav/<id>.wav`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let wav_dir = dir.join("wav");
        std::fs::create_dir_all(&wav_dir).map_err(io_err(&wav_dir))?;
        for (u, w) in self.manifest.utterances.iter().zip(&self.waveforms) {
            let rel = u.audio.clone().unwrap_or_else(|| audio_path(&u.id));
            w.write_wav(dir.join(rel))?;
        }
        self.manifest.save(dir)
    }
}

fn audio_path(id: &str) -> PathBuf {
    PathBuf::from("wav").join(format!("{id}.wav"))
}

/// Pitch (Hz), peak amplitude and duration scale implied by a label set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiceParams {
    pub f0: f64,
    pub amplitude: f64,
    pub rate_scale: f64,
}

pub fn voice_params(labels: &ContextLabels) -> VoiceParams {
    let f0_gender = match labels.get(LabelField::Gender) {
        "male" => 115.0,
        "female" => 210.0,
        _ => 140.0,
    };
    let age = match labels.get(LabelField::Age) {
        "child" => 1.45,
        "young" => 1.12,
        "old" => 0.88,
        _ => 1.0,
    };
    let rank = 1.0 + 0.02 * (labels.index(LabelField::SocialRank) as f64 - 4.0);
    let mut amplitude = 0.25;
    let mut rate_scale = 1.0;
    match labels.get(LabelField::Condition) {
        "shouting" | "kakegoe" | "loud_voice" | "angry" => amplitude *= 2.5,
        "small_voice" | "sad" => amplitude *= 0.35,
        "sleepy" | "tired" => {
            amplitude *= 0.5;
            rate_scale *= 1.25;
        }
        "panicked" | "excited" => rate_scale *= 0.8,
        _ => {}
    }
    match labels.get(LabelField::Distance) {
        "far" => amplitude *= 1.5,
        "near" => amplitude *= 0.8,
        _ => {}
    }
    if labels.get(LabelField::Individuality) == "fool" {
        rate_scale *= 0.85;
    }
    if labels.get(LabelField::Age) == "old" {
        rate_scale *= 1.15;
    }
    VoiceParams { f0: f0_gender * age * rank, amplitude, rate_scale }
}

/// Samples per phoneme for these labels.
pub fn phoneme_samples(labels: &ContextLabels, sample_rate: u32, phoneme_seconds: f64) -> usize {
    (phoneme_seconds * voice_params(labels).rate_scale * sample_rate as f64).round() as usize
}

fn formants(id: PhonemeId, class: PhonemeClass) -> Option<(f64, f64, f64)> {
    match class {
        PhonemeClass::Vowel => {
            let (a, b) = VOWEL_FORMANTS[id];
            Some((a, b, 1.0))
        }
        PhonemeClass::Consonant => {
            let c = (id - 5) as f64;
            Some((250.0 + 40.0 * (c % 8.0), 1200.0 + 110.0 * (c % 13.0), 0.45))
        }
        _ => None,
    }
}

/// Renders one utterance. `noise_seed` drives only the low-level noise floor.
pub fn render_utterance(
    phonemes: &[PhonemeId],
    labels: &ContextLabels,
    sample_rate: u32,
    phoneme_seconds: f64,
    noise_seed: u64,
) -> Result<Waveform> {
    let inv = PhonemeInventory::standard();
    let voice = voice_params(labels);
    let per = phoneme_samples(labels, sample_rate, phoneme_seconds);
    let total = per * phonemes.len();
    let sr = sample_rate as f64;
    let fade = ((FADE_SECONDS * sr) as usize).min(per / 2).max(1);
    let question = phonemes.last() == Some(&QSIL);
    // the final rise spans the two phonemes before the closing pause
    let rise_start = total.saturating_sub(3 * per);
    let rise_end = total.saturating_sub(per);
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut out = Vec::with_capacity(total);
    let mut phase = 0.0f64;
    for (k, &p) in phonemes.iter().enumerate() {
        let class = inv
            .class(p)
            .ok_or_else(|| FrontendError::InvalidRequest(format!("phoneme id {p} out of range")))?;
        let shape = formants(p, class);
        for i in 0..per {
            let n = k * per + i;
            let t = n as f64 / total as f64;
            let mut f0 = voice.f0 * (1.06 - 0.12 * t);
            if question && n >= rise_start && rise_end > rise_start {
                f0 *= 1.0 + 0.35 * ((n - rise_start) as f64 / (rise_end - rise_start) as f64).min(1.0);
            }
            phase = (phase + TAU * f0 / sr) % TAU;
            let mut s = rng.random_range(-NOISE_FLOOR..NOISE_FLOOR);
            if let Some((f1, f2, gain)) = shape {
                let edge = i.min(per - 1 - i);
                let env = if edge < fade { 0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / fade as f64).cos() } else { 1.0 };
                s += voice.amplitude * gain * env * voiced_source(phase, f0, f1, f2);
            }
            out.push(s);
        }
    }
    Ok(Waveform::new(sample_rate, out)?)
}

/// Harmonic series up to `SOURCE_TOP_HZ` with a falling tilt and two
/// resonances. Peak-normalised: the partial weights sum to one.
fn voiced_source(phase: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let resonance = |f: f64, centre: f64, bw: f64| 1.0 / (1.0 + ((f - centre) / bw).powi(2));
    let n = ((SOURCE_TOP_HZ / f0) as usize).max(1);
    let (mut sum, mut norm) = (0.0, 0.0);
    for k in 1..=n {
        let f = k as f64 * f0;
        let a = (k as f64).powf(-0.7) * (0.25 + resonance(f, f1, 90.0) + 0.5 * resonance(f, f2, 140.0));
        sum += a * (k as f64 * phase).sin();
        norm += a;
    }
    sum / norm
}

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn sample_labels(rng: &mut ChaCha8Rng, register_only: bool) -> Result<ContextLabels> {
    let mut l = ContextLabels::default();
    let narration = rng.random_bool(0.25);
    if !narration {
        l.set(LabelField::Gender, pick(rng, &["male", "female"]))?;
        l.set(LabelField::Age, pick(rng, &["child", "young", "middle-aged", "old"]))?;
    }
    if register_only {
        l.set_index(LabelField::Part, rng.random_range(0..3))?;
        return Ok(l);
    }
    if !narration {
        l.set_index(LabelField::SocialRank, rng.random_range(1..9))?;
        if rng.random_bool(0.2) {
            l.set(LabelField::Individuality, "fool")?;
        }
        let rel = pick(rng, &["narrative", "soliloquy", "superior", "inferior"]);
        l.set(LabelField::Relationship, rel)?;
        let (comp, dist) = match rel {
            "narrative" => ("narrative", "narrative"),
            "soliloquy" => ("soliloquy", "near"),
            _ => (pick(rng, &["one", "two_or_more"]), pick(rng, &["near", "middle", "far"])),
        };
        l.set(LabelField::NCompanion, comp)?;
        l.set(LabelField::Distance, dist)?;
    }
    let r: f64 = rng.random();
    if r < 0.4 {
        l.set(LabelField::Condition, "neutral")?;
    } else if r < 0.5 {
        l.set(LabelField::Condition, "shouting")?;
    } else if r < 0.6 {
        l.set(LabelField::Condition, "small_voice")?;
    } else {
        l.set_index(LabelField::Condition, rng.random_range(0..LabelField::Condition.cardinality()))?;
    }
    l.set_index(LabelField::Part, rng.random_range(0..3))?;
    Ok(l)
}

/// Mostly CV syllables with occasional `N`, `cl` and `pau`, never ending on `pau`.
fn sample_phonemes(rng: &mut ChaCha8Rng, len: usize) -> Vec<PhonemeId> {
    let inv = PhonemeInventory::standard();
    let n_id = inv.id("N").expect("N in inventory");
    let cl_id = inv.id("cl").expect("cl in inventory");
    let mut inner = Vec::with_capacity(len + 2);
    while inner.len() < len {
        let r: f64 = rng.random();
        if r < 0.05 && !inner.is_empty() {
            inner.push(cl_id);
        } else if r < 0.12 && !inner.is_empty() && inner.last() != Some(&PAU) {
            inner.push(PAU);
        } else if r < 0.2 && !inner.is_empty() {
            inner.push(n_id);
        }
        if rng.random_bool(0.75) {
            inner.push(5 + rng.random_range(0..CONSONANTS.len()));
        }
        inner.push(rng.random_range(0..5));
    }
    inner.truncate(len);
    if let Some(last) = inner.last_mut() {
        if *last == PAU {
            *last = 0;
        }
    }
    let end = if rng.random_bool(QUESTION_RATIO) { QSIL } else { SIL };
    let mut out = vec![SIL];
    out.extend(inner);
    out.push(end);
    out
}

/// Ten percent each (at least one) for validation and test; the rest train.
fn partition_sizes(n: usize) -> (usize, usize, usize) {
    let held = (n / 10).max(1);
    (n - 2 * held, held, held)
}

pub fn generate_synthetic_corpus_with(cfg: &SyntheticCorpusConfig) -> Result<SyntheticCorpus> {
    if cfg.n_utterances < 3 {
        return Err(FrontendError::InvalidRequest("need at least 3 utterances so every partition is non-empty".into()));
    }
    if *cfg.phonemes.start() == 0 || cfg.phonemes.is_empty() {
        return Err(FrontendError::InvalidRequest(format!("bad phoneme range {:?}", cfg.phonemes)));
    }
    if !(cfg.phoneme_seconds > 0.0) {
        return Err(FrontendError::InvalidRequest("phoneme duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n_train, n_val, _) = partition_sizes(cfg.n_utterances);
    let mut utterances = Vec::with_capacity(cfg.n_utterances);
    let mut waveforms = Vec::with_capacity(cfg.n_utterances);
    let mut assignment = BTreeMap::new();
    for i in 0..cfg.n_utterances {
        let id = format!("syn{i:05}");
        let len = rng.random_range(cfg.phonemes.clone());
        let phonemes = sample_phonemes(&mut rng, len);
        let labels = sample_labels(&mut rng, cfg.register_only)?;
        let noise_seed: u64 = rng.random();
        let wav = render_utterance(&phonemes, &labels, cfg.sample_rate, cfg.phoneme_seconds, noise_seed)?;
        let mut u = Utterance::new(id.clone(), phonemes, labels)?;
        u.audio = Some(audio_path(&id));
        u.duration = Some(wav.duration());
        let part = if i < n_train {
            Partition::Train
        } else if i < n_train + n_val {
            Partition::Validation
        } else {
            Partition::Test
        };
        assignment.insert(id, part);
        utterances.push(u);
        waveforms.push(wav);
    }
    Ok(SyntheticCorpus { manifest: CorpusManifest::new(utterances, assignment)?, waveforms })
}

/// 16 kHz corpus with the default phoneme length.
pub fn generate_synthetic_corpus(seed: u64, n_utterances: usize, phonemes: RangeInclusive<usize>) -> Result<SyntheticCorpus> {
    generate_synthetic_corpus_with(&SyntheticCorpusConfig::new(seed, n_utterances, phonemes))
}
