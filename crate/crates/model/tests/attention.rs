use proptest::prelude::*;
use rakugo_autodiff::layers::ParamInit;
use rakugo_autodiff::{Graph, Mode, ParamStore};
use rakugo_model::attention::{ForwardAttention, MultiHeadAttention};
use rakugo_model::{expected_position, forward_attention_step, initial_alignment, ModelError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, len).prop_map(normalized)
}

#[test]
fn initial_alignment_is_one_hot_at_start() {
    assert_eq!(initial_alignment(4), vec![1.0, 0.0, 0.0, 0.0]);
    assert_eq!(expected_position(&initial_alignment(4)), 0.0);
}

#[test]
fn zero_transition_with_uniform_content_never_moves() {
    let y = vec![0.2; 5];
    let mut a = initial_alignment(5);
    for _ in 0..50 {
        a = forward_attention_step(&a, 0.0, &y).unwrap();
        assert_eq!(a, initial_alignment(5));
    }
}

#[test]
fn full_transition_moves_one_step() {
    let a = forward_attention_step(&initial_alignment(3), 1.0, &[1.0 / 3.0; 3]).unwrap();
    assert_eq!(a, vec![0.0, 1.0, 0.0]);
}

#[test]
fn hand_computed_update() {
    // prior = 0.25 * [0.5, 0.5, 0] + 0.75 * [0, 0.5, 0.5] = [0.125, 0.5, 0.375]
    let a = forward_attention_step(&[0.5, 0.5, 0.0], 0.75, &[0.5, 0.25, 0.25]).unwrap();
    let raw = [0.0625, 0.125, 0.09375];
    let z: f64 = raw.iter().sum();
    for (got, r) in a.iter().zip(raw) {
        assert!((got - r / z).abs() < 1e-12);
    }
}

#[test]
fn content_mass_can_pull_expected_position_back() {
    // the recursion only guarantees that the prior step moves forward
    let a = forward_attention_step(&[0.5, 0.5], 0.0, &[0.9, 0.1]).unwrap();
    assert!(expected_position(&a) < expected_position(&[0.5, 0.5]));
}

#[test]
fn rejects_unnormalized_content() {
    let a = initial_alignment(2);
    assert!(matches!(forward_attention_step(&a, 0.5, &[0.6, 0.41]), Err(ModelError::NotNormalized(_))));
    assert!(forward_attention_step(&a, 0.5, &[0.6, 0.40005]).is_ok());
    assert!(forward_attention_step(&a, 0.5, &[0.5]).is_err());
    assert!(forward_attention_step(&a, 1.5, &[0.5, 0.5]).is_err());
}

#[test]
fn graph_recursion_matches_plain_update() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fa = ForwardAttention::new(&mut ParamInit::new(&mut store, &mut rng), "fa", 4, 3, 5, 2).unwrap();
    let mut g = Graph::new(Mode::Eval, 0);
    let memory = g.constant(common::random_values(1, 6 * 3, 1.0), 6, 3).unwrap();
    let processed = fa.process_memory(&mut g, &store, memory).unwrap();
    let mut state = fa.initial_state(&mut g, 6, 3).unwrap();
    for t in 0..8 {
        let query = g.constant(common::random_values(10 + t, 4, 2.0), 1, 4).unwrap();
        let pre = g.constant(common::random_values(20 + t, 2, 1.0), 1, 2).unwrap();
        let prev_alignment = g.value(state.alignment).to_vec();
        let u = g.scalar(state.transition);
        state = fa.step(&mut g, &store, processed, memory, query, pre, state).unwrap();
        let y = g.value(state.content).to_vec();
        let want = forward_attention_step(&prev_alignment, u, &y).unwrap();
        let got = g.value(state.alignment);
        let sum: f64 = got.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        // context is the alignment-weighted memory
        let ctx = g.value(state.context);
        let mem = g.value(memory);
        for d in 0..3 {
            let w: f64 = (0..6).map(|n| want[n] * mem[n * 3 + d]).sum();
            assert!((ctx[d] - w).abs() < 1e-12);
        }
        let u = g.scalar(state.transition);
        assert!(u > 0.0 && u < 1.0);
    }
}

#[test]
fn causal_self_attention_ignores_the_future() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mha = MultiHeadAttention::new(&mut ParamInit::new(&mut store, &mut rng), "mha", 4, 4, 4, 2).unwrap();
    let run = |x: Vec<f64>| {
        let mut g = Graph::new(Mode::Eval, 0);
        let x = g.constant(x, 5, 4).unwrap();
        let (y, w) = mha.forward(&mut g, &store, x, true, 0.0).unwrap();
        for head in &w {
            for (i, row) in g.value(*head).chunks(5).enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!(row[i + 1..].iter().all(|p| *p == 0.0));
            }
        }
        g.value(y).to_vec()
    };
    let a = common::random_values(5, 20, 1.0);
    let mut b = a.clone();
    for v in &mut b[12..] {
        *v += 3.0;
    }
    let (ya, yb) = (run(a), run(b));
    assert_eq!(ya[..12], yb[..12]);
    assert_ne!(ya[12..], yb[12..]);
}

proptest! {
    #[test]
    fn update_stays_normalized(alpha in distribution(7), y in distribution(7), u in 0.0f64..=1.0) {
        let a = forward_attention_step(&alpha, u, &y).unwrap();
        prop_assert!(a.iter().all(|v| *v >= 0.0));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn support_advances_at_most_one_position(steps in prop::collection::vec((distribution(8), 0.0f64..=1.0), 1..12)) {
        let mut a = initial_alignment(8);
        for (y, u) in steps {
            let frontier = a.iter().rposition(|v| *v > 0.0).unwrap();
            a = forward_attention_step(&a, u, &y).unwrap();
            let next = a.iter().rposition(|v| *v > 0.0).unwrap();
            prop_assert!(next <= frontier + 1);
        }
    }

    #[test]
    fn transition_prior_advances_by_u(alpha in distribution(6), u in 0.0f64..=1.0) {
        // with no mass on the last step and uniform content, only the prior acts
        let mut padded = alpha.clone();
        padded.push(0.0);
        let a = forward_attention_step(&padded, u, &[1.0 / 7.0; 7]).unwrap();
        prop_assert!((expected_position(&a) - expected_position(&padded) - u).abs() < 1e-9);
    }
}
