use crate::error::{DspError, Result};
use crate::f0::coefficient_of_variation;

/// Vowels, the moraic nasal and the geminate closure each carry one mora.
pub fn is_moraic(symbol: &str) -> bool {
    matches!(symbol, "a" | "e" | "i" | "o" | "u" | "N" | "cl")
}

pub fn count_morae<S: AsRef<str>>(symbols: &[S]) -> usize {
    symbols.iter().filter(|s| is_moraic(s.as_ref())).count()
}

/// Morae per second.
pub fn speech_rate<S: AsRef<str>>(symbols: &[S], duration_seconds: f64) -> Result<f64> {
    if !(duration_seconds > 0.0) || !duration_seconds.is_finite() {
        return Err(DspError::NonPositiveDuration(duration_seconds));
    }
    Ok(count_morae(symbols) as f64 / duration_seconds)
}

pub fn rate_cov(rates: &[f64]) -> Result<f64> {
    coefficient_of_variation(rates)
}
