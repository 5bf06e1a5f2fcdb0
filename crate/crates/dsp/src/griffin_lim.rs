use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::error::{DspError, Result};
use crate::mel::{MelAnalyzer, MelConfig, MelSpectrogram};
use crate::wave::Waveform;

pub const DEFAULT_ITERATIONS: usize = 60;
const PHASE_SEED: u64 = 0x6772_6966_6669_6e00;

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub waveform: Waveform,
    /// Spectral convergence after each iteration.
    pub convergence: Vec<f64>,
}

/// Mel inversion followed by iterative phase recovery.
pub struct GriffinLim {
    analyzer: MelAnalyzer,
    /// `bins x n_mels`, row-major.
    inverse: Vec<f64>,
}

impl GriffinLim {
    pub fn new(cfg: MelConfig) -> Result<Self> {
        let analyzer = MelAnalyzer::new(cfg)?;
        let c = analyzer.config();
        let bins = c.stft.bins();
        let fb = DMatrix::from_row_slice(c.n_mels, bins, analyzer.filters());
        let pinv = fb
            .pseudo_inverse(1e-10)
            .map_err(|e| DspError::InvalidParameter(format!("filterbank inversion: {e}")))?;
        let mut inverse = Vec::with_capacity(bins * c.n_mels);
        for k in 0..bins {
            for m in 0..c.n_mels {
                inverse.push(pinv[(k, m)]);
            }
        }
        Ok(Self { analyzer, inverse })
    }

    pub fn config(&self) -> &MelConfig {
        self.analyzer.config()
    }

    /// Linear magnitudes, `frames x bins`. Values at or below the log floor
    /// count as silence, so a silent spectrogram maps to exact zeros.
    pub fn mel_to_linear(&self, mel: &MelSpectrogram) -> Result<Vec<f64>> {
        let c = self.config();
        if mel.n_mels() != c.n_mels {
            return Err(DspError::MelDims { expected: c.n_mels, actual: mel.n_mels() });
        }
        let raw = mel.denormalized();
        let floor = c.log_floor.ln() + 1e-9;
        let bins = c.stft.bins();
        let mut out = Vec::with_capacity(raw.frames() * bins);
        for t in 0..raw.frames() {
            let m: Vec<f64> = raw.frame(t).iter().map(|&v| if v <= floor { 0.0 } else { v.exp() }).collect();
            for row in self.inverse.chunks(c.n_mels) {
                let s: f64 = row.iter().zip(&m).map(|(a, b)| a * b).sum();
                out.push(s.max(0.0));
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, mel: &MelSpectrogram, iterations: usize) -> Result<Reconstruction> {
        let mag = self.mel_to_linear(mel)?;
        self.reconstruct_linear(&mag, mel.frames(), iterations)
    }

    /// Phase recovery for a linear magnitude spectrogram. The result is
    /// scaled down only if it would otherwise clip.
    pub fn reconstruct_linear(&self, mag: &[f64], frames: usize, iterations: usize) -> Result<Reconstruction> {
        let c = self.config();
        let bins = c.stft.bins();
        if mag.len() != frames * bins {
            return Err(DspError::InvalidParameter(format!(
                "magnitude has {} values, expected {frames} x {bins}",
                mag.len()
            )));
        }
        if frames == 0 {
            return Err(DspError::Empty);
        }
        let stft = self.analyzer.stft();
        let target_norm = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
        let len = c.stft.signal_length(frames);
        if target_norm == 0.0 {
            return Ok(Reconstruction {
                waveform: Waveform::silence(c.sample_rate, len)?,
                convergence: vec![0.0; iterations],
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
        let mut spec: Vec<Complex<f64>> = mag
            .iter()
            .map(|&m| Complex::from_polar(m, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let mut x = stft.synthesize(&spec, frames);
        let mut convergence = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let est = stft.analyze(&x)?;
            let mut err = 0.0;
            for ((s, e), &m) in spec.iter_mut().zip(&est).zip(mag) {
                let n = e.norm();
                err += (n - m) * (n - m);
                *s = if n > 0.0 { e * (m / n) } else { Complex::new(m, 0.0) };
            }
            convergence.push(err.sqrt() / target_norm);
            x = stft.synthesize(&spec, frames);
        }
        let peak = x.iter().fold(0.0f64, |p, v| p.max(v.abs()));
        if peak > 1.0 {
            x.iter_mut().for_each(|v| *v /= peak);
        }
        Ok(Reconstruction { waveform: Waveform::new(c.sample_rate, x)?, convergence })
    }
}

pub fn griffin_lim(mel: &MelSpectrogram, cfg: &MelConfig, iterations: usize) -> Result<Waveform> {
    Ok(GriffinLim::new(cfg.clone())?.reconstruct(mel, iterations)?.waveform)
}
