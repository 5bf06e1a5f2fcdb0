//! Teacher-forced training with Adam, per-utterance gradients merged in a
//! fixed order so results do not depend on the thread count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rakugo_autodiff::{map_indexed, AdamConfig, AdamState, BatchStatUpdate, Gradients, Graph, Mode, ParamStore, Parallelism};
use rakugo_model::{LossBreakdown, ModelVariant};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::data::{Dataset, Example};
use crate::error::{io_err, PipelineError, Result};
use crate::model::{example_input, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean over training utterances, dropout and zoneout active.
    pub train: LossBreakdown,
    /// Mean over validation utterances in evaluation mode.
    pub validation: LossBreakdown,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub epochs: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train.total).collect()
    }

    pub fn validation_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.validation.total).collect()
    }

    pub fn best_validation(&self) -> Option<&EpochRecord> {
        self.epochs.iter().min_by(|a, b| a.validation.total.total_cmp(&b.validation.total))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "epoch,learning_rate,train_total,train_mel_before,train_mel_after,train_stop,train_l2,\
             val_total,val_mel_before,val_mel_after,val_stop,grad_norm,seconds\n",
        );
        for e in &self.epochs {
            let (t, v) = (&e.train, &e.validation);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
                e.epoch,
                e.learning_rate,
                t.total,
                t.mel_before,
                t.mel_after,
                t.stop,
                t.l2,
                v.total,
                v.mel_before,
                v.mel_after,
                v.stop,
                e.grad_norm,
                e.seconds
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(io_err(path))
    }
}

/// Optimizer position: Adam moments plus the number of completed epochs,
/// which together with the seed fixes every later shuffle and dropout mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub adam: AdamState,
    pub epochs_done: usize,
    pub seed: u64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn add(a: LossBreakdown, b: LossBreakdown) -> LossBreakdown {
    LossBreakdown {
        total: a.total + b.total,
        mel_before: a.mel_before + b.mel_before,
        mel_after: a.mel_after + b.mel_after,
        stop: a.stop + b.stop,
        l2: a.l2 + b.l2,
    }
}

fn scale(a: LossBreakdown, k: f64) -> LossBreakdown {
    LossBreakdown { total: a.total * k, mel_before: a.mel_before * k, mel_after: a.mel_after * k, stop: a.stop * k, l2: a.l2 * k }
}

struct UtteranceGrad {
    loss: LossBreakdown,
    grads: Gradients,
    stats: Vec<BatchStatUpdate>,
}

/// Loss and gradients of one utterance on its own training graph.
fn utterance_gradient(model: &TrainedModel, ex: &Example, l2: f64, seed: u64) -> Result<UtteranceGrad> {
    let mut g = Graph::new(Mode::Train, seed);
    let input = example_input(&model.net, ex);
    let terms = model.net.loss(&mut g, &model.store, &input, &ex.mel, l2)?;
    let loss = terms.values(&g);
    if !loss.total.is_finite() {
        return Ok(UtteranceGrad { loss, grads: Gradients::default(), stats: Vec::new() });
    }
    let grads = g.backward(terms.total)?;
    let stats = g.take_batch_stats();
    Ok(UtteranceGrad { loss, grads, stats })
}

/// Mean teacher-forced loss in evaluation mode (no dropout or zoneout).
pub fn evaluate(model: &TrainedModel, examples: &[Example], l2: f64, strategy: Parallelism) -> Result<LossBreakdown> {
    if examples.is_empty() {
        return Err(PipelineError::Empty("evaluation set"));
    }
    let losses = map_indexed(examples, strategy, |_, ex| -> Result<LossBreakdown> {
        let mut g = Graph::new(Mode::Eval, 0);
        let input = example_input(&model.net, ex);
        Ok(model.net.loss(&mut g, &model.store, &input, &ex.mel, l2)?.values(&g))
    });
    let mut sum = LossBreakdown::default();
    for l in losses {
        sum = add(sum, l?);
    }
    Ok(scale(sum, 1.0 / examples.len() as f64))
}

pub struct Trainer<'a> {
    pub model: TrainedModel,
    pub state: TrainState,
    pub history: LossHistory,
    cfg: TrainConfig,
    data: &'a Dataset,
    best: Option<(f64, ParamStore)>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Dataset, variant: ModelVariant, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut dims = cfg.dims()?;
        dims.n_mels = data.n_mels();
        let model = TrainedModel::new(variant, dims, data.stats.clone(), data.mel_config.sample_rate, cfg.seed)?;
        Self::resume(data, model, None, cfg)
    }

    /// Continues from `state`, or starts a fresh optimizer when `None`.
    pub fn resume(data: &'a Dataset, model: TrainedModel, state: Option<TrainState>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.train.is_empty() {
            return Err(PipelineError::EmptyPartition("training"));
        }
        if data.validation.is_empty() {
            return Err(PipelineError::EmptyPartition("validation"));
        }
        let state = match state {
            Some(s) => s,
            None => TrainState {
                adam: AdamState::new(AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() }, &model.store),
                epochs_done: 0,
                seed: cfg.seed,
            },
        };
        Ok(Self { model, state, history: LossHistory::default(), cfg: cfg.clone(), data, best: None })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Seeded permutation of the training set for 0-based `epoch`.
    pub fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.data.train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(self.state.seed, epoch as u64, 0)));
        order
    }

    /// One pass over the training set followed by validation.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let start = Instant::now();
        let epoch = self.state.epochs_done;
        let lr = self.cfg.learning_rate_at(epoch);
        self.state.adam.set_learning_rate(lr);
        let order = self.epoch_order(epoch);
        let strategy = self.cfg.parallelism();
        let mut sum = LossBreakdown::default();
        let mut grad_norm = 0.0;
        for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let examples: Vec<&Example> = batch.iter().map(|&i| &self.data.train[i]).collect();
            let model = &self.model;
            let l2 = self.cfg.l2_weight;
            let seed = self.state.seed;
            let results = map_indexed(&examples, strategy, |k, ex| {
                utterance_gradient(model, ex, l2, mix(seed, epoch as u64 + 1, (b * 1_000_003 + k) as u64 + 1))
            });
            let mut merged = Gradients::default();
            let mut stats = Vec::new();
            for (r, ex) in results.into_iter().zip(&examples) {
                let r = r?;
                if !r.loss.total.is_finite() {
                    return Err(PipelineError::Diverged { epoch: epoch + 1, batch: b, loss: r.loss.total, utterance: ex.id.clone() });
                }
                sum = add(sum, r.loss);
                merged.merge(r.grads);
                stats.extend(r.stats);
            }
            merged.scale(1.0 / examples.len() as f64);
            let store = &mut self.model.store;
            store.zero_grad();
            store.accumulate(&merged)?;
            grad_norm = if self.cfg.clip_norm > 0.0 { store.clip_grad_norm(self.cfg.clip_norm) } else { store.grad_norm() };
            if !grad_norm.is_finite() {
                return Err(PipelineError::Diverged { epoch: epoch + 1, batch: b, loss: grad_norm, utterance: "gradient norm".into() });
            }
            self.state.adam.step(store)?;
            store.apply_batch_stats(&stats);
        }
        self.state.epochs_done += 1;
        let train = scale(sum, 1.0 / order.len() as f64);
        let validation = evaluate(&self.model, &self.data.validation, self.cfg.l2_weight, strategy)?;
        if self.cfg.keep_best && self.best.as_ref().is_none_or(|(v, _)| validation.total < *v) {
            self.best = Some((validation.total, self.model.store.clone()));
        }
        let rec = EpochRecord {
            epoch: epoch + 1,
            learning_rate: lr,
            train,
            validation,
            grad_norm,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {:>4}  lr {:.2e}  train {:.4}  val {:.4}  ({:.1}s)",
            rec.epoch,
            lr,
            train.total,
            validation.total,
            rec.seconds
        );
        self.history.epochs.push(rec);
        Ok(rec)
    }

    /// Runs until `cfg.epochs` epochs are complete.
    pub fn run(&mut self) -> Result<()> {
        while self.state.epochs_done < self.cfg.epochs {
            self.run_epoch()?;
        }
        Ok(())
    }

    /// Final model (best-validation parameters when `keep_best` is set).
    pub fn finish(mut self) -> TrainOutcome {
        if let Some((_, store)) = self.best.take() {
            self.model.store = store;
        }
        TrainOutcome { model: self.model, state: self.state, history: self.history }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub state: TrainState,
    pub history: LossHistory,
}

/// Trains `variant` on `data` for `cfg.epochs` epochs.
pub fn train(data: &Dataset, variant: ModelVariant, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = Trainer::new(data, variant, cfg)?;
    t.run()?;
    Ok(t.finish())
}
