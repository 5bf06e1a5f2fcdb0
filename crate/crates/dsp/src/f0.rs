use crate::error::{DspError, Result};
use crate::wave::Waveform;

pub const FRAME_SHIFT_SECONDS: f64 = 0.005;
pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.3;
const WINDOW_SECONDS: f64 = 0.04;
const MIN_RMS: f64 = 1e-4;
/// Earliest peak within this fraction of the best one wins; avoids octave-down errors.
const PEAK_RATIO: f64 = 0.9;

/// One value per 5 ms frame; `None` marks unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub frame_shift: f64,
    pub values: Vec<Option<f64>>,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }
}

/// Normalised-autocorrelation pitch tracker.
pub fn estimate_f0(wav: &Waveform) -> F0Track {
    let sr = wav.sample_rate() as f64;
    let hop = (sr * FRAME_SHIFT_SECONDS).round() as usize;
    let window = (sr * WINDOW_SECONDS).round() as usize;
    let min_lag = (sr / F0_MAX).floor() as usize;
    let max_lag = (sr / F0_MIN).ceil() as usize;
    let x = wav.samples();
    let span = window + max_lag + 1;
    let mut values = Vec::new();
    let mut start = 0;
    while start + span <= x.len() {
        values.push(frame_f0(&x[start..start + span], window, min_lag, max_lag, sr));
        start += hop;
    }
    F0Track { frame_shift: FRAME_SHIFT_SECONDS, values }
}

fn frame_f0(seg: &[f64], window: usize, min_lag: usize, max_lag: usize, sr: f64) -> Option<f64> {
    let e0: f64 = seg[..window].iter().map(|v| v * v).sum();
    if (e0 / window as f64).sqrt() < MIN_RMS {
        return None;
    }
    // sliding energy of the lagged window
    let mut e_lag: f64 = seg[min_lag - 1..min_lag - 1 + window].iter().map(|v| v * v).sum();
    let mut r = vec![0.0; max_lag + 2];
    for lag in min_lag - 1..=max_lag + 1 {
        if lag > min_lag - 1 {
            e_lag += seg[lag + window - 1].powi(2) - seg[lag - 1].powi(2);
        }
        let dot: f64 = seg[..window].iter().zip(&seg[lag..lag + window]).map(|(a, b)| a * b).sum();
        let den = (e0 * e_lag.max(0.0)).sqrt();
        r[lag] = if den > 0.0 { dot / den } else { 0.0 };
    }
    let best = (min_lag..=max_lag).map(|l| r[l]).fold(f64::NEG_INFINITY, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    let lag = (min_lag..=max_lag).find(|&l| r[l] >= PEAK_RATIO * best && r[l] >= r[l - 1] && r[l] >= r[l + 1])?;
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let f0 = sr / (lag as f64 + offset);
    (F0_MIN..=F0_MAX).contains(&f0).then_some(f0)
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(DspError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(DspError::ZeroMean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Coefficient of variation over every voiced frame of every track.
pub fn f0_cov(tracks: &[F0Track]) -> Result<f64> {
    let voiced: Vec<f64> = tracks.iter().flat_map(|t| t.voiced()).collect();
    if voiced.is_empty() {
        return Err(DspError::NoVoicedFrames);
    }
    coefficient_of_variation(&voiced)
}
