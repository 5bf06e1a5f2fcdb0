//! Turning a corpus into normalised training examples.

use std::collections::HashMap;
use std::path::Path;

use rakugo_autodiff::Parallelism;
use rakugo_dsp::{mel_batch, MelConfig, MelStats, Waveform};
use rakugo_frontend::{filter_utterances, ContextLabels, CorpusManifest, Partition, SyntheticCorpus, Utterance};

use crate::error::{PipelineError, Result};

/// One utterance ready for teacher forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub phonemes: Vec<usize>,
    pub labels: ContextLabels,
    /// Normalised log-mel frames, `[frames, n_mels]`.
    pub mel: Vec<f64>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
    /// Fitted on the training partition.
    pub stats: MelStats,
    pub mel_config: MelConfig,
}

impl Dataset {
    /// Length-filters the manifest, extracts mels, and normalises them with
    /// statistics of the training partition.
    pub fn from_corpus(manifest: &CorpusManifest, waveforms: &[Waveform], strategy: Parallelism) -> Result<Self> {
        if manifest.utterances.len() != waveforms.len() {
            return Err(PipelineError::InvalidConfig(format!(
                "{} utterances but {} waveforms",
                manifest.utterances.len(),
                waveforms.len()
            )));
        }
        let rate = waveforms.first().ok_or(PipelineError::Empty("corpus"))?.sample_rate();
        let mel_config = MelConfig::for_rate(rate)?;
        let durations: HashMap<String, f64> =
            manifest.utterances.iter().zip(waveforms).map(|(u, w)| (u.id.clone(), w.duration())).collect();
        let kept = filter_utterances(manifest, &durations)?.manifest;
        let index: HashMap<&str, usize> = manifest.utterances.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
        let waves: Vec<Waveform> = kept.utterances.iter().map(|u| waveforms[index[u.id.as_str()]].clone()).collect();
        let mut mels = mel_batch(&waves, &mel_config, strategy)?;

        let train_mels: Vec<_> = kept
            .utterances
            .iter()
            .zip(&mels)
            .filter(|(u, _)| kept.partition_of(&u.id) == Some(Partition::Train))
            .map(|(_, m)| m.clone())
            .collect();
        if train_mels.is_empty() {
            return Err(PipelineError::EmptyPartition("training"));
        }
        let stats = MelStats::fit(&train_mels)?;

        let mut ds = Dataset { train: Vec::new(), validation: Vec::new(), test: Vec::new(), stats, mel_config };
        for (u, mel) in kept.utterances.iter().zip(mels.iter_mut()) {
            mel.normalize(&ds.stats)?;
            let ex = example(u, mel.data().to_vec(), mel.frames());
            match kept.partition_of(&u.id) {
                Some(Partition::Train) => ds.train.push(ex),
                Some(Partition::Validation) => ds.validation.push(ex),
                _ => ds.test.push(ex),
            }
        }
        if ds.validation.is_empty() {
            return Err(PipelineError::EmptyPartition("validation"));
        }
        Ok(ds)
    }

    pub fn from_synthetic(corpus: &SyntheticCorpus, strategy: Parallelism) -> Result<Self> {
        Self::from_corpus(&corpus.manifest, &corpus.waveforms, strategy)
    }

    /// Reads a corpus directory written by [`SyntheticCorpus::write`] or laid out the same way.
    pub fn load(dir: &Path, strategy: Parallelism) -> Result<Self> {
        let manifest = CorpusManifest::load(dir)?;
        let waves = manifest
            .utterances
            .iter()
            .map(|u| Ok(Waveform::read_wav(dir.join(u.audio.clone().unwrap_or_else(|| format!("wav/{}.wav", u.id).into())))?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_corpus(&manifest, &waves, strategy)
    }

    pub fn n_mels(&self) -> usize {
        self.mel_config.n_mels
    }

    /// Keeps the first `n` training utterances.
    pub fn truncate_train(&mut self, n: usize) {
        self.train.truncate(n);
    }
}

fn example(u: &Utterance, mel: Vec<f64>, frames: usize) -> Example {
    Example { id: u.id.clone(), phonemes: u.phonemes.clone(), labels: u.labels, mel, frames }
}
