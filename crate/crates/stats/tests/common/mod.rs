#![allow(dead_code)]

use rakugo_stats::{Question, ScoreRecord, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYSTEMS: [&str; 4] = ["AbS", "SA-Tacotron", "Tacotron", "Tacotron-ATTR"];

/// Latin-square style design: listener l hears story s from system (l + s) mod 4.
/// Scores drift with a per-listener bias and a per-system quality.
pub fn simulated(listeners: usize, stories: usize, seed: u64) -> ScoreTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for l in 0..listeners {
        let bias: i32 = rng.random_range(-1..=1);
        for s in 0..stories {
            let sys = (l + s) % SYSTEMS.len();
            for q in Question::ALL {
                let base = 4 - sys as i32 / 2 + bias + rng.random_range(-1..=1);
                let score = base.clamp(1, 5) as f64;
                records.push(ScoreRecord::new(format!("L{l:02}"), format!("S{s}"), SYSTEMS[sys], q, score));
            }
        }
    }
    ScoreTable::raw(records).unwrap()
}
