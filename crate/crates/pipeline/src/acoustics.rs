//! Pitch and speaking-rate measurements over a directory of stimuli.

use std::path::{Path, PathBuf};

use rakugo_autodiff::{map_indexed, Parallelism};
use rakugo_dsp::{estimate_f0, speech_rate, Waveform};
use rakugo_frontend::CorpusManifest;
use rakugo_stats::SystemAcoustics;

use crate::error::{io_err, PipelineError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Reads `dir/manifest.txt` and measures every utterance's audio. Entries
/// without an audio field are looked up as `wav/<id>.wav`.
pub fn measure_directory(system: &str, dir: &Path, strategy: Parallelism) -> Result<SystemAcoustics> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let utterances = CorpusManifest::parse_manifest(&text, &path)?;
    if utterances.is_empty() {
        return Err(PipelineError::Empty("stimulus manifest"));
    }
    let measured = map_indexed(&utterances, strategy, |_, u| -> Result<_> {
        let rel = u.audio.clone().unwrap_or_else(|| PathBuf::from("wav").join(format!("{}.wav", u.id)));
        let wav = Waveform::read_wav(dir.join(rel))?;
        let rate = speech_rate(&u.symbols(), wav.duration())?;
        Ok((estimate_f0(&wav), rate))
    });
    let mut f0_tracks = Vec::with_capacity(utterances.len());
    let mut speech_rates = Vec::with_capacity(utterances.len());
    for m in measured {
        let (track, rate) = m?;
        f0_tracks.push(track);
        speech_rates.push(rate);
    }
    Ok(SystemAcoustics { system: system.to_string(), f0_tracks, speech_rates })
}
