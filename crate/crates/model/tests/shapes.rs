//! Construction-time widths at full size.

use rakugo_autodiff::{Graph, Mode, ParamStore};
use rakugo_model::{ModelDims, ModelInput, StyleSource, Tacotron};

mod common;

fn shape(store: &ParamStore, name: &str) -> Vec<usize> {
    store.by_name(name).unwrap().shape().to_vec()
}

#[test]
fn full_size_self_attention_model_with_style_and_context() {
    let dims = ModelDims::paper();
    let (model, store) = common::build("SA-Tacotron-GST-8-context", dims.clone(), 1);
    assert_eq!(model.decoder_block_width(), 1568);
    assert_eq!(model.context_embedder().unwrap().dim(), 68);
    assert_eq!(model.gst().unwrap().tokens.head_dim(), 64);
    assert_eq!(shape(&store, "encoder.gst.tokens.tokens"), vec![10, 512]);
    assert_eq!(shape(&store, "encoder.embedding.table"), vec![44, 512]);
    assert_eq!(shape(&store, "decoder.prenet1.weight"), vec![256, 256]);
    assert_eq!(shape(&store, "decoder.lstm1.w_hidden"), vec![1024, 4096]);
    assert_eq!(shape(&store, "decoder.lstm2.w_hidden"), vec![1024, 4096]);
    assert_eq!(shape(&store, "decoder.lstm1.w_input"), vec![256 + 512 + 32, 4096]);
    assert_eq!(shape(&store, "decoder.self_attention.dense.weight"), vec![1568, 1568]);
    assert_eq!(shape(&store, "decoder.mel_proj.weight"), vec![1568, 80]);
    assert_eq!(shape(&store, "encoder.conv2.weight"), vec![5 * 512, 512]);
    assert_eq!(shape(&store, "postnet.conv4.weight"), vec![5 * 512, 80]);

    let labels = common::labels();
    let reference = common::mel(4, 70, 80);
    let input = ModelInput::new(&[5, 0, 12, 3, 41, 7, 1])
        .with_labels(&labels)
        .with_style(StyleSource::Reference(&reference));
    let mut g = Graph::new(Mode::Eval, 0);
    let enc = model.encode(&mut g, &store, &input).unwrap();
    assert_eq!(enc.conv_input_width, 512 + 512 + 68);
    assert_eq!(g.shape(enc.memory), (7, 512));
    assert_eq!(g.shape(enc.sa_memory.unwrap()), (7, 32));
    assert_eq!(g.shape(enc.style.unwrap()), (1, 512));
    assert_eq!(g.shape(enc.style_weights.unwrap()), (8, 10));

    let target = common::mel(5, 2, 80);
    let out = model.decode_teacher_forced(&mut g, &store, &enc, &target, 2).unwrap();
    assert_eq!(g.shape(out.block), (2, 1568));
    assert_eq!(g.shape(out.mel_before), (2, 80));
    assert_eq!(g.shape(out.mel_after), (2, 80));
    assert_eq!(g.shape(out.alignments), (2, 7));
    for z in g.value(out.stop_logits) {
        let p = 1.0 / (1.0 + (-z).exp());
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn full_size_backbone_with_role_attributes() {
    let (model, store) = common::build("Tacotron-ATTR", ModelDims::paper(), 2);
    assert_eq!(model.decoder_block_width(), 1024 + 512);
    assert_eq!(model.context_embedder().unwrap().dim(), 4);
    let labels = common::labels();
    let mut g = Graph::new(Mode::Eval, 0);
    let enc = model.encode(&mut g, &store, &ModelInput::new(&[1, 2, 3]).with_labels(&labels)).unwrap();
    assert_eq!(enc.conv_input_width, 512 + 4);
    assert_eq!(g.shape(enc.memory), (3, 512));
    assert!(enc.sa_memory.is_none());
}
