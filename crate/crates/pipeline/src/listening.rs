//! Simulated listening-test answers for exercising the evaluation chain
//! without human raters.

use rakugo_stats::{Question, ScoreRecord, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone)]
pub struct SimulatedListening {
    /// System name and its mean offset from the scale midpoint.
    pub systems: Vec<(String, f64)>,
    pub listeners: usize,
    pub stories: usize,
    pub seed: u64,
    /// Spread of per-answer noise, in score steps.
    pub noise: f64,
}

impl SimulatedListening {
    /// Quality falls linearly from +1 for the first system to -1 for the last.
    pub fn ranked(systems: &[String], listeners: usize, stories: usize, seed: u64) -> Self {
        let k = systems.len().max(2) - 1;
        let systems = systems.iter().enumerate().map(|(i, s)| (s.clone(), 1.0 - 2.0 * i as f64 / k as f64)).collect();
        Self { systems, listeners, stories, seed, noise: 0.8 }
    }

    /// Listener `l` hears story `s` from system `(l + s) mod k` and answers
    /// every question; each listener also carries a constant bias.
    pub fn generate(&self) -> Result<ScoreTable> {
        if self.systems.is_empty() || self.listeners == 0 || self.stories == 0 {
            return Err(PipelineError::Empty("simulated listening design"));
        }
        let noise = Normal::new(0.0, self.noise)
            .map_err(|e| PipelineError::InvalidConfig(format!("noise spread {}: {e}", self.noise)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut records = Vec::with_capacity(self.listeners * self.stories * Question::ALL.len());
        for l in 0..self.listeners {
            let bias: f64 = rng.random_range(-0.5..0.5);
            for s in 0..self.stories {
                let (system, quality) = &self.systems[(l + s) % self.systems.len()];
                for q in Question::ALL {
                    let v = 3.0 + quality + bias + noise.sample(&mut rng);
                    let score = v.round().clamp(1.0, 5.0);
                    records.push(ScoreRecord::new(format!("L{:03}", l + 1), format!("S{:02}", s + 1), system.clone(), q, score));
                }
            }
        }
        Ok(ScoreTable::raw(records)?)
    }
}
