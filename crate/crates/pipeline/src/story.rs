//! Multi-sentence synthesis: each sentence is generated and vocoded on its
//! own, then joined with measured pauses and brought to a common level.

use std::path::Path;

use rakugo_autodiff::{map_indexed, Parallelism};
use rakugo_dsp::{level_normalize, GriffinLim, Waveform, DEFAULT_ITERATIONS, TARGET_DBOV};
use rakugo_frontend::Utterance;
use rakugo_model::SynthesisOptions;

use crate::error::{io_err, PipelineError, Result};
use crate::model::{Style, TrainedModel};

#[derive(Debug, Clone)]
pub struct StoryOptions {
    pub synthesis: SynthesisOptions,
    pub griffin_lim_iterations: usize,
    pub target_dbov: f64,
    pub parallelism: Parallelism,
}

impl Default for StoryOptions {
    fn default() -> Self {
        Self {
            synthesis: SynthesisOptions::default(),
            griffin_lim_iterations: DEFAULT_ITERATIONS,
            target_dbov: TARGET_DBOV,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoryAudio {
    pub waveform: Waveform,
    /// Seconds of audio generated for each sentence, before level scaling.
    pub sentence_durations: Vec<f64>,
    /// Sentences whose decoding hit the step limit.
    pub truncated: Vec<usize>,
}

/// Reads one pause length in seconds per line. Blank lines and `#` comments are skipped.
pub fn read_pauses(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| PipelineError::PauseFile { path: path.to_path_buf(), line: n + 1, reason };
        let v: f64 = line.parse().map_err(|e| bad(format!("`{line}`: {e}")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(bad(format!("pause {v} is not a non-negative duration")));
        }
        out.push(v);
    }
    Ok(out)
}

/// Synthesises `sentences` in order with `pauses[i]` seconds of silence
/// after sentence `i`, then normalises the whole story to `opts.target_dbov`.
pub fn synthesize_story(
    sentences: &[Utterance],
    pauses: &[f64],
    model: &TrainedModel,
    style: Style<'_>,
    opts: &StoryOptions,
) -> Result<StoryAudio> {
    if sentences.is_empty() {
        return Err(PipelineError::Empty("sentence list"));
    }
    if pauses.len() != sentences.len() - 1 {
        return Err(PipelineError::PauseCount { expected: sentences.len() - 1, actual: pauses.len() });
    }
    let vocoder = GriffinLim::new(model.mel_config()?)?;
    let parts = map_indexed(sentences, opts.parallelism, |i, u| -> Result<(Waveform, bool)> {
        let synth_opts = SynthesisOptions { seed: opts.synthesis.seed.wrapping_add(i as u64), ..opts.synthesis };
        let (out, mel) = model.synthesize(&u.phonemes, &u.labels, style, None, &synth_opts)?;
        let wav = vocoder.reconstruct(&mel, opts.griffin_lim_iterations)?.waveform;
        Ok((wav, out.truncated))
    });

    let mut story: Option<Waveform> = None;
    let mut sentence_durations = Vec::with_capacity(sentences.len());
    let mut truncated = Vec::new();
    for (i, part) in parts.into_iter().enumerate() {
        let (wav, cut) = part?;
        if cut {
            log::warn!("sentence {} ({}) reached the step limit", i + 1, sentences[i].id);
            truncated.push(i);
        }
        sentence_durations.push(wav.duration());
        match story.as_mut() {
            None => story = Some(wav),
            Some(s) => s.concat_with_gap(&wav, pauses[i - 1])?,
        }
    }
    let waveform = level_normalize(&story.expect("at least one sentence"), opts.target_dbov)?;
    Ok(StoryAudio { waveform, sentence_durations, truncated })
}
