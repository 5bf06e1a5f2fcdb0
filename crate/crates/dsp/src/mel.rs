use std::io::{Read, Write};
use std::path::Path;

use rakugo_autodiff::{map_indexed, Parallelism};

use crate::error::{DspError, Result};
use crate::stft::{Stft, StftConfig};
use crate::wave::Waveform;

pub const DEFAULT_N_MELS: usize = 80;
pub const LOG_FLOOR: f64 = 1e-5;
const MEL_MAGIC: &[u8; 8] = b"RKGMEL01";

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl MelConfig {
    /// 50 ms frames with a 12.5 ms shift.
    pub fn for_rate(sample_rate: u32) -> Result<Self> {
        let n_fft = match sample_rate {
            16_000 => 1024,
            48_000 => 4096,
            other => return Err(DspError::UnsupportedSampleRate(other)),
        };
        let sr = sample_rate as usize;
        Ok(Self {
            sample_rate,
            stft: StftConfig { frame_length: sr / 20, frame_shift: sr / 80, n_fft },
            n_mels: DEFAULT_N_MELS,
            fmin: 0.0,
            fmax: sample_rate as f64 / 2.0,
            log_floor: LOG_FLOOR,
        })
    }

    pub fn with_n_mels(mut self, n_mels: usize) -> Self {
        self.n_mels = n_mels;
        self
    }

    pub fn frame_shift_seconds(&self) -> f64 {
        self.stft.frame_shift as f64 / self.sample_rate as f64
    }

    /// Triangular filters, `n_mels x bins`, peak height one.
    pub fn filterbank(&self) -> Vec<f64> {
        let bins = self.stft.bins();
        let (lo, hi) = (hz_to_mel(self.fmin), hz_to_mel(self.fmax));
        let points: Vec<f64> = (0..self.n_mels + 2)
            .map(|i| lo + (hi - lo) * i as f64 / (self.n_mels + 1) as f64)
            .collect();
        let bin_hz = self.sample_rate as f64 / self.stft.n_fft as f64;
        let mut fb = vec![0.0; self.n_mels * bins];
        for m in 0..self.n_mels {
            let (l, c, r) = (points[m], points[m + 1], points[m + 2]);
            for k in 0..bins {
                let mel = hz_to_mel(k as f64 * bin_hz);
                let w = if mel > l && mel <= c {
                    (mel - l) / (c - l)
                } else if mel > c && mel < r {
                    (r - mel) / (r - c)
                } else {
                    0.0
                };
                fb[m * bins + k] = w;
            }
        }
        fb
    }
}

/// Per-dimension mean and standard deviation over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl MelStats {
    /// Dimensions with (numerically) zero spread keep unit scale.
    pub fn fit(mels: &[MelSpectrogram]) -> Result<Self> {
        let n_mels = mels.first().ok_or(DspError::Empty)?.n_mels;
        let mut sum = vec![0.0; n_mels];
        let mut count = 0usize;
        for m in mels {
            if m.n_mels != n_mels {
                return Err(DspError::MelDims { expected: n_mels, actual: m.n_mels });
            }
            for row in m.data.chunks(n_mels) {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            count += m.frames();
        }
        if count == 0 {
            return Err(DspError::Empty);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; n_mels];
        for m in mels {
            for row in m.data.chunks(n_mels) {
                for ((s, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
                    *s += (v - mu) * (v - mu);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-8 { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }
}

/// Log-mel spectrogram, `frames x n_mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    n_mels: usize,
    data: Vec<f64>,
    normalization: Option<MelStats>,
}

impl MelSpectrogram {
    pub fn new(n_mels: usize, data: Vec<f64>) -> Result<Self> {
        if n_mels == 0 || data.len() % n_mels != 0 {
            return Err(DspError::MelDims { expected: n_mels, actual: data.len() });
        }
        Ok(Self { n_mels, data, normalization: None })
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.n_mels
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn normalization(&self) -> Option<&MelStats> {
        self.normalization.as_ref()
    }

    pub fn normalize(&mut self, stats: &MelStats) -> Result<()> {
        self.check_stats(stats)?;
        if self.normalization.is_some() {
            return Err(DspError::InvalidParameter("spectrogram is already normalised".into()));
        }
        for row in self.data.chunks_mut(self.n_mels) {
            for ((v, mu), sd) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                *v = (*v - mu) / sd;
            }
        }
        self.normalization = Some(stats.clone());
        Ok(())
    }

    pub fn denormalized(&self) -> MelSpectrogram {
        match &self.normalization {
            None => self.clone(),
            Some(stats) => {
                let mut data = self.data.clone();
                for row in data.chunks_mut(self.n_mels) {
                    for ((v, mu), sd) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                        *v = *v * sd + mu;
                    }
                }
                MelSpectrogram { n_mels: self.n_mels, data, normalization: None }
            }
        }
    }

    /// Marks raw model output as living in the normalised domain of `stats`.
    pub fn with_normalization(mut self, stats: MelStats) -> Result<Self> {
        self.check_stats(&stats)?;
        self.normalization = Some(stats);
        Ok(self)
    }

    fn check_stats(&self, stats: &MelStats) -> Result<()> {
        if stats.mean.len() != self.n_mels || stats.std.len() != self.n_mels {
            return Err(DspError::MelDims { expected: self.n_mels, actual: stats.mean.len() });
        }
        Ok(())
    }

    /// 8-byte magic, `u64` frames, `u64` mels, then `f32` values, all little endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MEL_MAGIC)?;
        w.write_all(&(self.frames() as u64).to_le_bytes())?;
        w.write_all(&(self.n_mels as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| DspError::BadMelFile("truncated header".into()))?;
        if &magic != MEL_MAGIC {
            return Err(DspError::BadMelFile("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|_| DspError::BadMelFile("truncated header".into()))?;
        let frames = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(|_| DspError::BadMelFile("truncated header".into()))?;
        let n_mels = u64::from_le_bytes(word) as usize;
        let total = frames
            .checked_mul(n_mels)
            .filter(|t| *t <= 1 << 32)
            .ok_or_else(|| DspError::BadMelFile("implausible shape".into()))?;
        let mut bytes = vec![0u8; total * 4];
        r.read_exact(&mut bytes).map_err(|_| DspError::BadMelFile("truncated data".into()))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Self::new(n_mels, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Reusable analyser: filterbank and FFT plans are built once.
pub struct MelAnalyzer {
    cfg: MelConfig,
    stft: Stft,
    filters: Vec<f64>,
}

impl MelAnalyzer {
    pub fn new(cfg: MelConfig) -> Result<Self> {
        if cfg.n_mels == 0 {
            return Err(DspError::InvalidParameter("n_mels must be positive".into()));
        }
        let stft = Stft::new(cfg.stft)?;
        let filters = cfg.filterbank();
        Ok(Self { cfg, stft, filters })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn filters(&self) -> &[f64] {
        &self.filters
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn analyze(&self, wav: &Waveform) -> Result<MelSpectrogram> {
        if wav.sample_rate() != self.cfg.sample_rate {
            return Err(DspError::InvalidParameter(format!(
                "analyser expects {} Hz, got {} Hz",
                self.cfg.sample_rate,
                wav.sample_rate()
            )));
        }
        let mag = self.stft.magnitude(wav.samples())?;
        let bins = self.cfg.stft.bins();
        let mut data = Vec::with_capacity(mag.len() / bins * self.cfg.n_mels);
        for frame in mag.chunks(bins) {
            for filt in self.filters.chunks(bins) {
                let e: f64 = filt.iter().zip(frame).map(|(w, m)| w * m).sum();
                data.push(e.max(self.cfg.log_floor).ln());
            }
        }
        MelSpectrogram::new(self.cfg.n_mels, data)
    }
}

pub fn mel_spectrogram(wav: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram> {
    MelAnalyzer::new(cfg.clone())?.analyze(wav)
}

pub fn mel_batch(waves: &[Waveform], cfg: &MelConfig, strategy: Parallelism) -> Result<Vec<MelSpectrogram>> {
    let analyzer = MelAnalyzer::new(cfg.clone())?;
    map_indexed(waves, strategy, |_, w| analyzer.analyze(w)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let c = MelConfig::for_rate(16000).unwrap();
        assert_eq!((c.stft.frame_length, c.stft.frame_shift, c.stft.n_fft), (800, 200, 1024));
        let c = MelConfig::for_rate(48000).unwrap();
        assert_eq!((c.stft.frame_length, c.stft.frame_shift, c.stft.n_fft), (2400, 600, 4096));
        assert!(MelConfig::for_rate(8000).is_err());
    }

    #[test]
    fn mel_scale_round_trip() {
        for f in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let m = MelSpectrogram::new(3, vec![0.5, -1.25, 2.0, 3.0, 4.0, -5.5]).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 6 * 4);
        assert_eq!(MelSpectrogram::read_binary(&buf[..]).unwrap(), m);
        assert!(MelSpectrogram::read_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(MelSpectrogram::read_binary(&bad[..]).is_err());
    }

    #[test]
    fn normalise_then_denormalise() {
        let a = MelSpectrogram::new(2, vec![1.0, 5.0, 3.0, 5.0, 2.0, 5.0]).unwrap();
        let stats = MelStats::fit(std::slice::from_ref(&a)).unwrap();
        assert_eq!(stats.std[1], 1.0, "constant dimension keeps unit scale");
        let mut n = a.clone();
        n.normalize(&stats).unwrap();
        assert!(n.normalize(&stats).is_err());
        let back = n.denormalized();
        for (x, y) in back.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
