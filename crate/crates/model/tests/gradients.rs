//! Finite-difference checks of the full training objective on miniature
//! networks.

use std::time::Instant;

use rakugo_autodiff::{grad_check, GradCheckOptions, Graph, Mode, ParamKind, ParamStore};
use rakugo_model::{ModelDims, ModelInput, ModelVariant, StyleSource, Tacotron, DEFAULT_L2_WEIGHT};

mod common;
use common::PHONEMES;

const TOL: f64 = 1e-4;

/// Zero-initialised biases put ReLUs fed by the zero go frame exactly on
/// their kink, where one-sided differences disagree with any subgradient.
fn jitter_biases(store: &mut ParamStore) {
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.kind == ParamKind::Bias).map(|(id, _)| id).collect();
    for (k, id) in ids.into_iter().enumerate() {
        let t = store.get_mut(id);
        let noise = common::random_values(100 + k as u64, t.len(), 0.1);
        t.values_mut().iter_mut().zip(noise).for_each(|(v, n)| *v += n);
    }
}

fn check_variant(variant: ModelVariant) -> (f64, ParamStore, Tacotron) {
    let dims = ModelDims::miniature();
    let mut store = ParamStore::new();
    let model = Tacotron::new(variant, dims, &mut store, 21).unwrap();
    jitter_biases(&mut store);
    let labels = common::labels();
    let target = common::mel(22, 4, 6);
    // long enough that the last reference conv keeps four positions for batch norm
    let reference = common::mel(25, 256, 6);
    let opts = GradCheckOptions { eps: 1e-5, max_coords_per_param: None, seed: 23 };
    let report = grad_check(&mut store, opts, |s| {
        // fixed graph seed: dropout and zoneout masks replay identically
        let mut g = Graph::new(Mode::Train, 24);
        let input = ModelInput::new(&PHONEMES)
            .with_labels(&labels)
            .with_style(StyleSource::Reference(&reference));
        let terms = model.loss(&mut g, s, &input, &target, DEFAULT_L2_WEIGHT).expect("loss");
        Ok((g, terms.total))
    })
    .unwrap();
    println!(
        "{variant}: per-parameter {:.3e} ({:?}), per-coordinate {:.3e} ({:?}), {} coordinates",
        report.max_rel_error, report.worst, report.max_coord_rel_error, report.worst_coord, report.coords_checked
    );
    assert!(report.nonzero_coords > report.coords_checked / 2, "{variant}: {report:?}");
    (report.max_rel_error, store, model)
}

#[test]
fn every_variant_matches_finite_differences() {
    let start = Instant::now();
    for variant in ModelVariant::all() {
        let (err, _, _) = check_variant(variant);
        assert!(err < TOL, "{variant}: {err}");
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
}

#[test]
fn tokens_and_postnet_receive_gradient() {
    let variant: ModelVariant = "SA-Tacotron-GST-8".parse().unwrap();
    let dims = ModelDims::miniature();
    let mut store = ParamStore::new();
    let model = Tacotron::new(variant, dims, &mut store, 1).unwrap();
    let target = common::mel(2, 5, 6);
    let mut g = Graph::new(Mode::Train, 3);
    let input = ModelInput::new(&PHONEMES).with_style(StyleSource::Reference(&target));
    let terms = model.loss(&mut g, &store, &input, &target, DEFAULT_L2_WEIGHT).unwrap();
    let grads = g.backward(terms.total).unwrap();
    for name in ["encoder.gst.tokens.tokens", "postnet.conv0.weight", "decoder.mel_proj.weight", "encoder.embedding.table"] {
        let id = store.id(name).unwrap();
        let grad = grads.get(id).unwrap();
        assert!(grad.iter().any(|v| *v != 0.0), "{name}");
    }
}
