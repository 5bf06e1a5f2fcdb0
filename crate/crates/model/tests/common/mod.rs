#![allow(dead_code)]

use rakugo_autodiff::ParamStore;
use rakugo_frontend::{ContextLabels, LabelField};
use rakugo_model::{ModelDims, ModelVariant, Tacotron};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PHONEMES: [usize; 4] = [5, 0, 12, 3];

pub fn random_values(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn mel(seed: u64, frames: usize, n_mels: usize) -> Vec<f64> {
    random_values(seed, frames * n_mels, 1.0)
}

pub fn labels() -> ContextLabels {
    ContextLabels::default()
        .with(LabelField::Gender, "female")
        .unwrap()
        .with(LabelField::Condition, "happy")
        .unwrap()
}

pub fn build(variant: &str, dims: ModelDims, seed: u64) -> (Tacotron, ParamStore) {
    let variant: ModelVariant = variant.parse().unwrap();
    let mut store = ParamStore::new();
    let model = Tacotron::new(variant, dims, &mut store, seed).unwrap();
    (model, store)
}
