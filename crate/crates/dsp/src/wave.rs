use std::path::Path;

use crate::error::{DspError, Result};

/// Mono audio in `[-1, 1]` at 16 or 48 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    sample_rate: u32,
    samples: Vec<f64>,
}

impl Waveform {
    pub const SUPPORTED_RATES: [u32; 2] = [16_000, 48_000];

    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if !Self::SUPPORTED_RATES.contains(&sample_rate) {
            return Err(DspError::UnsupportedSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn silence(sample_rate: u32, len: usize) -> Result<Self> {
        Self::new(sample_rate, vec![0.0; len])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|s| s * gain).collect(),
        }
    }

    /// Appends `other` after `gap_seconds` of silence.
    pub fn concat_with_gap(&mut self, other: &Waveform, gap_seconds: f64) -> Result<()> {
        if other.sample_rate != self.sample_rate {
            return Err(DspError::InvalidParameter(format!(
                "cannot join {} Hz and {} Hz audio",
                self.sample_rate, other.sample_rate
            )));
        }
        if gap_seconds < 0.0 || !gap_seconds.is_finite() {
            return Err(DspError::InvalidParameter(format!("pause of {gap_seconds} s")));
        }
        let gap = (gap_seconds * self.sample_rate as f64).round() as usize;
        self.samples.extend(std::iter::repeat_n(0.0, gap));
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }

    /// 16-bit PCM mono; samples are clipped to `[-1, 1]`.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec)?;
        for &s in &self.samples {
            w.write_sample(to_pcm16(s))?;
        }
        w.finalize()?;
        Ok(())
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = hound::WavReader::open(path)?;
        let spec = r.spec();
        if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
            return Err(DspError::InvalidParameter(format!(
                "expected 16-bit PCM mono, got {} channel(s) at {} bits",
                spec.channels, spec.bits_per_sample
            )));
        }
        let samples = r
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(spec.sample_rate, samples)
    }

    /// Round-trips through 16-bit quantisation, matching what a WAV file holds.
    pub fn quantized(&self) -> Self {
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|&s| to_pcm16(s) as f64 / 32768.0).collect(),
        }
    }
}

fn to_pcm16(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_rate_and_nan() {
        assert!(matches!(Waveform::new(22050, vec![]), Err(DspError::UnsupportedSampleRate(22050))));
        assert!(matches!(Waveform::new(16000, vec![0.0, f64::NAN]), Err(DspError::NonFinite(1))));
    }

    #[test]
    fn wav_round_trip_is_quantised_copy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = Waveform::new(16000, (0..100).map(|i| (i as f64 * 0.1).sin() * 0.5).collect()).unwrap();
        w.write_wav(&path).unwrap();
        let back = Waveform::read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (a, b) in back.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1.0 / 16000.0);
        }
    }

    #[test]
    fn gap_concatenation_length() {
        let mut a = Waveform::new(16000, vec![0.1; 1600]).unwrap();
        let b = Waveform::new(16000, vec![0.1; 800]).unwrap();
        a.concat_with_gap(&b, 0.5).unwrap();
        assert_eq!(a.len(), 1600 + 8000 + 800);
    }
}
