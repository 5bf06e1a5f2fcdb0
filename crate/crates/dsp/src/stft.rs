use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{DspError, Result};

/// Frame geometry for the short-time Fourier transform.
///
/// Frames are not centred or padded: frame `m` covers samples
/// `[m * shift, m * shift + length)`, windowed by a periodic Hann window and
/// zero-padded to `n_fft`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub n_fft: usize,
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.frame_shift == 0 || self.frame_length > self.n_fft {
            return Err(DspError::InvalidParameter(format!("bad STFT geometry {self:?}")));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn num_frames(&self, samples: usize) -> Result<usize> {
        if samples < self.frame_length {
            return Err(DspError::TooShort { samples, frame_length: self.frame_length });
        }
        Ok(1 + (samples - self.frame_length) / self.frame_shift)
    }

    pub fn signal_length(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.frame_shift + self.frame_length
        }
    }
}

pub fn hann(length: usize) -> Vec<f64> {
    (0..length)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / length as f64).cos())
        .collect()
}

/// Forward and inverse transforms with cached FFT plans.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: hann(cfg.frame_length),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    /// One-sided complex spectrum, `frames x bins`, row-major.
    pub fn analyze(&self, x: &[f64]) -> Result<Vec<Complex<f64>>> {
        let frames = self.cfg.num_frames(x.len())?;
        let bins = self.cfg.bins();
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.n_fft];
        for m in 0..frames {
            let start = m * self.cfg.frame_shift;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (n, w) in self.window.iter().enumerate() {
                buf[n].re = x[start + n] * w;
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        Ok(out)
    }

    pub fn magnitude(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.analyze(x)?.iter().map(|c| c.norm()).collect())
    }

    /// Least-squares inverse: the signal whose STFT is closest to `spec`.
    pub fn synthesize(&self, spec: &[Complex<f64>], frames: usize) -> Vec<f64> {
        let bins = self.cfg.bins();
        let n_fft = self.cfg.n_fft;
        let len = self.cfg.signal_length(frames);
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        for m in 0..frames {
            let row = &spec[m * bins..(m + 1) * bins];
            buf[..bins].copy_from_slice(row);
            for k in bins..n_fft {
                buf[k] = row[n_fft - k].conj();
            }
            // DC and Nyquist must be real for a real signal
            buf[0].im = 0.0;
            if n_fft % 2 == 0 {
                buf[n_fft / 2].im = 0.0;
            }
            self.inverse.process(&mut buf);
            let start = m * self.cfg.frame_shift;
            for (n, w) in self.window.iter().enumerate() {
                num[start + n] += w * buf[n].re / n_fft as f64;
                den[start + n] += w * w;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(a, d)| if *d > 1e-12 { a / d } else { 0.0 })
            .collect()
    }
}
