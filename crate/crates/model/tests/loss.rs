use rakugo_autodiff::{Graph, Mode, ParamKind, ParamStore, Tensor};
use rakugo_model::loss::{compute_loss, masked_mse, stop_targets};

fn bce(z: f64, y: f64) -> f64 {
    let p = 1.0 / (1.0 + (-z).exp());
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[test]
fn two_frame_case_matches_hand_computation() {
    let mut store = ParamStore::new();
    store.add("w", ParamKind::Weight, Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap()).unwrap();
    store.add("b", ParamKind::Bias, Tensor::new(vec![1], vec![5.0]).unwrap()).unwrap();
    let target = [0.5, -1.0, 2.0, 0.0];
    let before = [0.0, -1.5, 2.5, 1.0];
    let after = [0.5, -0.5, 2.0, 0.25];
    let logits = [-1.2, 0.7];

    let mut g = Graph::new(Mode::Train, 0);
    let t = g.constant(target.to_vec(), 2, 2).unwrap();
    let b = g.constant(before.to_vec(), 2, 2).unwrap();
    let a = g.constant(after.to_vec(), 2, 2).unwrap();
    let s = g.constant(logits.to_vec(), 2, 1).unwrap();
    let terms = compute_loss(&mut g, &store, b, a, s, t, 2, 0.01).unwrap();
    let got = terms.values(&g);

    let mse_b = (0.25 + 0.25 + 0.25 + 1.0) / 4.0;
    let mse_a = (0.0 + 0.25 + 0.0 + 0.0625) / 4.0;
    let stop = (bce(-1.2, 0.0) + bce(0.7, 1.0)) / 2.0;
    let l2 = 0.01 * 5.0;
    assert!((got.mel_before - mse_b).abs() < 1e-12);
    assert!((got.mel_after - mse_a).abs() < 1e-12);
    assert!((got.stop - stop).abs() < 1e-12);
    assert!((got.l2 - l2).abs() < 1e-12);
    assert!((got.total - (mse_b + mse_a + stop + l2)).abs() < 1e-12);
}

#[test]
fn unit_offset_gives_unit_mse() {
    let store = ParamStore::new();
    let mut g = Graph::new(Mode::Train, 0);
    let target: Vec<f64> = (0..15).map(|i| i as f64 * 0.3 - 2.0).collect();
    let pred: Vec<f64> = target.iter().map(|v| v + 1.0).collect();
    let t = g.constant(target, 5, 3).unwrap();
    let p = g.constant(pred, 5, 3).unwrap();
    let s = g.zeros(5, 1);
    let got = compute_loss(&mut g, &store, p, p, s, t, 5, 1e-6).unwrap().values(&g);
    assert!((got.mel_before - 1.0).abs() < 1e-12);
    assert!((got.mel_after - 1.0).abs() < 1e-12);
    assert_eq!(got.l2, 0.0);
}

#[test]
fn perfect_confident_prediction_is_nearly_free() {
    let store = ParamStore::new();
    let mut g = Graph::new(Mode::Train, 0);
    let t = g.constant(vec![0.3; 8], 4, 2).unwrap();
    let s = g.constant(vec![-40.0, -40.0, -40.0, 40.0], 4, 1).unwrap();
    let got = compute_loss(&mut g, &store, t, t, s, t, 4, 1e-6).unwrap().values(&g);
    assert!(got.total >= 0.0 && got.total < 1e-15);
}

#[test]
fn padded_frames_are_masked() {
    let mut g = Graph::new(Mode::Train, 0);
    let t = g.constant(vec![1.0, 1.0, 0.0, 0.0], 2, 2).unwrap();
    let p = g.constant(vec![2.0, 1.0, 100.0, -100.0], 2, 2).unwrap();
    let m = masked_mse(&mut g, p, t, 1).unwrap();
    assert!((g.scalar(m) - 0.5).abs() < 1e-12);
    assert!(masked_mse(&mut g, p, t, 3).is_err());
    assert_eq!(stop_targets(4, 3), vec![0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn shape_mismatch_is_an_error() {
    let store = ParamStore::new();
    let mut g = Graph::new(Mode::Train, 0);
    let t = g.zeros(3, 2);
    let row = g.zeros(1, 2);
    let s = g.zeros(3, 1);
    assert!(compute_loss(&mut g, &store, row, t, s, t, 3, 0.0).is_err());
    let short = g.zeros(2, 1);
    assert!(compute_loss(&mut g, &store, t, t, short, t, 3, 0.0).is_err());
}
