//! A network together with everything needed to run it on new input.

use rakugo_autodiff::ParamStore;
use rakugo_dsp::{MelConfig, MelSpectrogram, MelStats};
use rakugo_frontend::ContextLabels;
use rakugo_model::{ModelDims, ModelInput, ModelVariant, StyleSource, StyleWeights, Synthesis, SynthesisOptions, Tacotron};
use sha2::{Digest, Sha256};

use crate::data::Example;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: Tacotron,
    pub store: ParamStore,
    pub mel_stats: MelStats,
    pub sample_rate: u32,
}

/// How the style embedding of a GST variant is chosen at synthesis time.
#[derive(Debug, Clone, Copy, Default)]
pub enum Style<'a> {
    /// Use the utterance's own reference mel when it has one, else equal
    /// weight on every token.
    #[default]
    Auto,
    /// Normalised `[frames, n_mels]` reference.
    Reference(&'a [f64]),
    Weights(&'a StyleWeights),
}

/// Identifies an architecture: variant, every width, and the audio rate.
pub fn fingerprint(variant: ModelVariant, dims: &ModelDims, sample_rate: u32) -> String {
    let mut h = Sha256::new();
    h.update(format!("variant={variant}\ndims={dims:?}\nsample_rate={sample_rate}\n").as_bytes());
    let digest = h.finalize();
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

impl TrainedModel {
    /// Freshly initialised network.
    pub fn new(variant: ModelVariant, dims: ModelDims, mel_stats: MelStats, sample_rate: u32, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let net = Tacotron::new(variant, dims, &mut store, seed)?;
        Ok(Self { net, store, mel_stats, sample_rate })
    }

    pub fn variant(&self) -> ModelVariant {
        self.net.variant()
    }

    pub fn dims(&self) -> &ModelDims {
        self.net.dims()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self.variant(), self.dims(), self.sample_rate)
    }

    pub fn mel_config(&self) -> Result<MelConfig> {
        Ok(MelConfig::for_rate(self.sample_rate)?.with_n_mels(self.dims().n_mels))
    }

    /// Free-running synthesis; returns the model output and its denormalised mel.
    pub fn synthesize(
        &self,
        phonemes: &[usize],
        labels: &ContextLabels,
        style: Style<'_>,
        reference: Option<&[f64]>,
        opts: &SynthesisOptions,
    ) -> Result<(Synthesis, MelSpectrogram)> {
        let gst = self.variant().conditioning.uses_gst();
        let uniform = StyleWeights::uniform(self.dims().gst_tokens, self.dims().gst_heads)?;
        let source = match (style, reference) {
            _ if !gst => StyleSource::None,
            (Style::Reference(r), _) => StyleSource::Reference(r),
            (Style::Weights(w), _) => StyleSource::Weights(w),
            (Style::Auto, Some(r)) => StyleSource::Reference(r),
            (Style::Auto, None) => StyleSource::Weights(&uniform),
        };
        let mut input = ModelInput::new(phonemes).with_style(source);
        if self.variant().conditioning.context_mode().is_some() {
            input = input.with_labels(labels);
        }
        let out = self.net.synthesize(&self.store, &input, opts)?;
        let mel = MelSpectrogram::new(out.n_mels, out.mel.clone())?.with_normalization(self.mel_stats.clone())?.denormalized();
        Ok((out, mel))
    }

    /// Synthesis of a corpus example, with its own mel as the style reference.
    pub fn synthesize_example(&self, ex: &Example, opts: &SynthesisOptions) -> Result<(Synthesis, MelSpectrogram)> {
        self.synthesize(&ex.phonemes, &ex.labels, Style::Auto, Some(&ex.mel), opts)
    }
}

/// Model input for teacher forcing on a corpus example.
pub fn example_input<'a>(net: &Tacotron, ex: &'a Example) -> ModelInput<'a> {
    let mut input = ModelInput::new(&ex.phonemes);
    if net.variant().conditioning.uses_gst() {
        input = input.with_style(StyleSource::Reference(&ex.mel));
    }
    if net.variant().conditioning.context_mode().is_some() {
        input = input.with_labels(&ex.labels);
    }
    input
}
