use proptest::prelude::*;
use rakugo_autodiff::Parallelism;
use rakugo_pipeline::{PipelineError, TrainConfig};

#[test]
fn toml_round_trip() {
    let cfg = TrainConfig { batch_size: 3, learning_rate: 2.5e-3, epochs: 17, seed: 99, keep_best: true, ..TrainConfig::paper() };
    let text = cfg.to_toml();
    assert_eq!(TrainConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn missing_keys_take_desk_defaults() {
    let cfg = TrainConfig::from_toml("epochs = 5\n").unwrap();
    assert_eq!(cfg, TrainConfig { epochs: 5, ..TrainConfig::desk() });
    let desk = TrainConfig::desk();
    assert_eq!((desk.batch_size, desk.scale, desk.epochs), (8, 0.125, 300));
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(TrainConfig::from_toml("epochs = 5\nlearning_rat = 0.1\n").is_err());
}

#[test]
fn load_reports_path_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "epochs = \"many\"\n").unwrap();
    match TrainConfig::load(&bad) {
        Err(PipelineError::ConfigParse { path, .. }) => assert_eq!(path, bad),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let zero = dir.path().join("zero.toml");
    std::fs::write(&zero, "batch_size = 0\n").unwrap();
    assert!(matches!(TrainConfig::load(&zero), Err(PipelineError::InvalidConfig(_))));
    let ok = dir.path().join("ok.toml");
    std::fs::write(&ok, "scale = 0.0625\nparallel = false\n").unwrap();
    let cfg = TrainConfig::load(&ok).unwrap();
    assert_eq!(cfg.parallelism(), Parallelism::Sequential);
    assert_eq!(cfg.dims().unwrap().dec_lstm, 64);
}

#[test]
fn invalid_values() {
    for cfg in [
        TrainConfig { scale: 0.0, ..TrainConfig::desk() },
        TrainConfig { scale: 1.5, ..TrainConfig::desk() },
        TrainConfig { learning_rate: f64::NAN, ..TrainConfig::desk() },
        TrainConfig { lr_decay: 1.2, ..TrainConfig::desk() },
        TrainConfig { clip_norm: -1.0, ..TrainConfig::desk() },
    ] {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn learning_rate_schedule() {
    let cfg = TrainConfig::desk();
    assert_eq!(cfg.learning_rate_at(0), 1e-3);
    assert!((cfg.learning_rate_at(1) - 0.98e-3).abs() < 1e-18);
    assert!((cfg.learning_rate_at(10) - 1e-3 * 0.98f64.powi(10)).abs() < 1e-15);
    // 0.98^228 < 0.01
    assert_eq!(cfg.learning_rate_at(1000), 1e-5);
}

proptest! {
    #[test]
    fn schedule_is_non_increasing_and_floored(lr in 1e-5f64..1e-1, decay in 0.5f64..=1.0, floor in 0.0f64..1e-4, epoch in 0usize..5000) {
        let cfg = TrainConfig { learning_rate: lr, lr_decay: decay, lr_floor: floor, ..TrainConfig::desk() };
        let a = cfg.learning_rate_at(epoch);
        let b = cfg.learning_rate_at(epoch + 1);
        prop_assert!(b <= a);
        prop_assert!(b >= floor);
    }
}
