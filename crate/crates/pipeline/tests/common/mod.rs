#![allow(dead_code)]

use rakugo_autodiff::Parallelism;
use rakugo_frontend::generate_synthetic_corpus;
use rakugo_pipeline::{Dataset, TrainConfig};

/// Small corpus of short utterances: `n - 2 * max(1, n / 10)` of them train.
pub fn tiny_data(n: usize, seed: u64) -> Dataset {
    let corpus = generate_synthetic_corpus(seed, n, 7..=9).unwrap();
    Dataset::from_synthetic(&corpus, Parallelism::Sequential).unwrap()
}

pub fn tiny_config(epochs: usize) -> TrainConfig {
    TrainConfig { scale: 1.0 / 16.0, epochs, batch_size: 2, ..TrainConfig::desk() }
}
