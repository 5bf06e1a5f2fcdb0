use crate::error::{DspError, Result};
use crate::wave::Waveform;

pub const TARGET_DBOV: f64 = -26.0;
/// Frames quieter than the loud reference by more than this are inactive.
pub const ACTIVITY_MARGIN_DB: f64 = 15.9;
const FRAME_SECONDS: f64 = 0.02;
const REFERENCE_PERCENTILE: f64 = 0.95;

/// Active speech level in dB relative to full scale (a full-scale square
/// wave is 0 dBov). Frame energies are ranked and frames within the margin
/// of the 95th-percentile frame count as active.
pub fn active_level(wav: &Waveform) -> Result<f64> {
    let frame = ((wav.sample_rate() as f64 * FRAME_SECONDS) as usize).max(1);
    let x = wav.samples();
    let energies: Vec<f64> = if x.len() < frame {
        vec![mean_square(x)]
    } else {
        x.chunks_exact(frame).map(mean_square).collect()
    };
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let reference = sorted[((sorted.len() as f64 * REFERENCE_PERCENTILE).ceil() as usize).clamp(1, sorted.len()) - 1];
    if reference <= 0.0 {
        return Err(DspError::Silent);
    }
    let threshold = reference * 10f64.powf(-ACTIVITY_MARGIN_DB / 10.0);
    let active: Vec<f64> = energies.into_iter().filter(|e| *e >= threshold).collect();
    let mean = active.iter().sum::<f64>() / active.len() as f64;
    Ok(10.0 * mean.log10())
}

pub fn level_normalize(wav: &Waveform, target_dbov: f64) -> Result<Waveform> {
    let level = active_level(wav)?;
    Ok(wav.scaled(10f64.powf((target_dbov - level) / 20.0)))
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}
