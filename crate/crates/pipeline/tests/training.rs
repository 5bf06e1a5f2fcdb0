mod common;

use common::{tiny_config, tiny_data};
use rakugo_autodiff::Parallelism;
use rakugo_model::ModelVariant;
use rakugo_pipeline::{evaluate, train, PipelineError, TrainConfig, Trainer};

fn tacotron() -> ModelVariant {
    "Tacotron".parse().unwrap()
}

#[test]
fn same_seed_gives_identical_curves() {
    let data = tiny_data(12, 5);
    let cfg = tiny_config(3);
    let a = train(&data, tacotron(), &cfg).unwrap();
    let b = train(&data, tacotron(), &cfg).unwrap();
    assert_eq!(a.history.train_losses(), b.history.train_losses());
    assert_eq!(a.history.validation_losses(), b.history.validation_losses());
    assert!(a.model.store == b.model.store);

    let c = train(&data, tacotron(), &TrainConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a.history.train_losses(), c.history.train_losses());
}

#[test]
fn rayon_and_sequential_agree_bit_for_bit() {
    let data = tiny_data(12, 6);
    let cfg = tiny_config(2);
    let par = train(&data, tacotron(), &TrainConfig { parallel: true, ..cfg.clone() }).unwrap();
    let seq = train(&data, tacotron(), &TrainConfig { parallel: false, ..cfg }).unwrap();
    assert_eq!(par.history.train_losses(), seq.history.train_losses());
    assert!(par.model.store == seq.model.store);
}

#[test]
fn batch_larger_than_corpus_is_one_batch() {
    let data = tiny_data(12, 7);
    let big = TrainConfig { batch_size: 1000, ..tiny_config(1) };
    let whole = TrainConfig { batch_size: data.train.len(), ..tiny_config(1) };
    let a = train(&data, tacotron(), &big).unwrap();
    let b = train(&data, tacotron(), &whole).unwrap();
    assert_eq!(a.history.train_losses(), b.history.train_losses());
    assert_eq!(a.state.adam.step, 1);
}

#[test]
fn epoch_order_is_a_seeded_permutation() {
    let data = tiny_data(24, 8);
    let cfg = tiny_config(1);
    let t = Trainer::new(&data, tacotron(), &cfg).unwrap();
    let u = Trainer::new(&data, tacotron(), &cfg).unwrap();
    let n = data.train.len();
    for epoch in 0..4 {
        let order = t.epoch_order(epoch);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        assert_eq!(order, u.epoch_order(epoch));
    }
    assert_ne!(t.epoch_order(0), t.epoch_order(1));
}

#[test]
fn validation_runs_without_dropout() {
    let data = tiny_data(12, 9);
    let out = train(&data, tacotron(), &tiny_config(1)).unwrap();
    let a = evaluate(&out.model, &data.validation, 0.0, Parallelism::Sequential).unwrap();
    let b = evaluate(&out.model, &data.validation, 0.0, Parallelism::Rayon).unwrap();
    assert_eq!(a, b);
    let rec = out.history.epochs[0];
    let c = evaluate(&out.model, &data.validation, tiny_config(1).l2_weight, Parallelism::Sequential).unwrap();
    assert_eq!(rec.validation, c);
}

#[test]
fn history_csv_has_one_row_per_epoch() {
    let data = tiny_data(12, 10);
    let out = train(&data, tacotron(), &tiny_config(2)).unwrap();
    let csv = out.history.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("epoch,learning_rate,train_total"));
    assert!(lines[2].starts_with("2,0.00098,"));
    assert_eq!(out.state.epochs_done, 2);
}

#[test]
fn keep_best_restores_best_validation_parameters() {
    let data = tiny_data(12, 11);
    let cfg = TrainConfig { keep_best: true, learning_rate: 2e-3, ..tiny_config(4) };
    let out = train(&data, tacotron(), &cfg).unwrap();
    let best = out.history.best_validation().unwrap().validation.total;
    let now = evaluate(&out.model, &data.validation, cfg.l2_weight, Parallelism::Sequential).unwrap();
    assert_eq!(now.total, best);
}

#[test]
fn empty_validation_partition_is_refused() {
    let mut data = tiny_data(12, 12);
    data.validation.clear();
    assert!(matches!(
        Trainer::new(&data, tacotron(), &tiny_config(1)),
        Err(PipelineError::EmptyPartition("validation"))
    ));
}

#[test]
fn divergence_is_reported() {
    let mut data = tiny_data(12, 13);
    data.train[0].mel[0] = f64::NAN;
    let err = train(&data, tacotron(), &TrainConfig { batch_size: 1, ..tiny_config(1) }).unwrap_err();
    match err {
        PipelineError::Diverged { epoch, utterance, .. } => {
            assert_eq!(epoch, 1);
            assert_eq!(utterance, data.train[0].id);
        }
        other => panic!("expected divergence, got {other}"),
    }
}

#[test]
fn every_variant_survives_one_step() {
    let mut data = tiny_data(12, 14);
    data.truncate_train(2);
    let cfg = TrainConfig { epochs: 1, ..tiny_config(1) };
    let variants = ModelVariant::all();
    assert_eq!(variants.len(), 12);
    for v in variants {
        let out = train(&data, v, &cfg).unwrap_or_else(|e| panic!("{v}: {e}"));
        let rec = out.history.epochs[0];
        assert!(rec.train.total.is_finite() && rec.validation.total.is_finite(), "{v}");
        assert!(rec.grad_norm > 0.0, "{v}");
    }
}
