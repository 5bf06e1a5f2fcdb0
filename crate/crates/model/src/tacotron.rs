use rakugo_autodiff::layers::{BatchNorm, BiLstm, Conv1d, Dense, Embedding, Lstm, LstmState, ParamInit};
use rakugo_autodiff::{Graph, Mode, ParamStore, Var};
use rakugo_frontend::{ContextEmbedder, ContextLabels};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    AdditiveAttention, DecoderSelfAttention, EncoderSelfAttention, ForwardAttention, ForwardAttentionState,
    SelfAttentionCache,
};
use crate::config::{ModelDims, ModelVariant};
use crate::error::{ModelError, Result};
use crate::gst::{GlobalStyleTokens, StyleWeights};
use crate::loss::{compute_loss, LossTerms};

/// Synthesis steps allowed per input symbol when no limit is given.
pub const MAX_STEPS_PER_SYMBOL: usize = 30;
pub const STOP_THRESHOLD: f64 = 0.5;

/// Where a GST model takes its style embedding from.
#[derive(Debug, Clone, Copy, Default)]
pub enum StyleSource<'a> {
    #[default]
    None,
    /// Row-major `[frames, n_mels]` normalised log-mel reference.
    Reference(&'a [f64]),
    Weights(&'a StyleWeights),
}

#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub phonemes: &'a [usize],
    pub labels: Option<&'a ContextLabels>,
    pub style: StyleSource<'a>,
}

impl<'a> ModelInput<'a> {
    pub fn new(phonemes: &'a [usize]) -> Self {
        Self { phonemes, labels: None, style: StyleSource::None }
    }

    pub fn with_labels(mut self, labels: &'a ContextLabels) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_style(mut self, style: StyleSource<'a>) -> Self {
        self.style = style;
        self
    }
}

/// Encoder outputs plus the attention memories derived from them.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// Width of the first convolution's input.
    pub conv_input_width: usize,
    /// `[T, 2 * enc_lstm]`
    pub memory: Var,
    processed: Var,
    /// `[T, enc_sa_dim]` for self-attention models.
    pub sa_memory: Option<Var>,
    processed_sa: Option<Var>,
    pub style: Option<Var>,
    /// `[heads, tokens]` when the style came from a reference.
    pub style_weights: Option<Var>,
}

/// Teacher-forced decoder outputs, all stacked over frames.
#[derive(Debug, Clone, Copy)]
pub struct DecoderOutput {
    pub mel_before: Var,
    pub mel_after: Var,
    /// `[frames, 1]`
    pub stop_logits: Var,
    /// `[frames, T]`
    pub alignments: Var,
    /// Decoder block output fed to the projections, `[frames, width]`.
    pub block: Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Defaults to thirty steps per input symbol.
    pub max_steps: Option<usize>,
    /// Keep prenet dropout active while decoding.
    pub prenet_dropout: bool,
    pub seed: u64,
    /// Emit exactly this many frames and ignore the stop token.
    pub fixed_frames: Option<usize>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { max_steps: None, prenet_dropout: true, seed: 0, fixed_frames: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub n_mels: usize,
    /// `[frames, n_mels]` before the post-net.
    pub mel_before: Vec<f64>,
    /// `[frames, n_mels]` after the post-net.
    pub mel: Vec<f64>,
    pub stop_probs: Vec<f64>,
    /// `[frames, T]`
    pub alignments: Vec<f64>,
    /// The step limit was reached before the stop token fired.
    pub truncated: bool,
    /// Per-head token weights, if a reference was given.
    pub style_weights: Option<Vec<Vec<f64>>>,
}

impl Synthesis {
    pub fn frames(&self) -> usize {
        self.mel.len() / self.n_mels
    }
}

#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv1d,
    bn: BatchNorm,
}

impl ConvBlock {
    fn new(init: &mut ParamInit, i: usize, input: usize, output: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv1d::new(init, &format!("conv{i}"), input, output, kernel, false)?,
            bn: BatchNorm::new(init, &format!("bn{i}"), output)?,
        })
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let y = self.conv.forward(g, store, x)?;
        Ok(self.bn.forward(g, store, y)?)
    }
}

/// Tacotron-2 or self-attention Tacotron with optional style and context
/// conditioning of the encoder input.
#[derive(Debug, Clone)]
pub struct Tacotron {
    variant: ModelVariant,
    dims: ModelDims,
    embedding: Embedding,
    gst: Option<GlobalStyleTokens>,
    context: Option<ContextEmbedder>,
    enc_convs: Vec<ConvBlock>,
    enc_lstm: BiLstm,
    enc_sa: Option<EncoderSelfAttention>,
    prenet: [Dense; 2],
    lstm1: Lstm,
    lstm2: Lstm,
    forward_attention: ForwardAttention,
    sa_attention: Option<AdditiveAttention>,
    dec_sa: Option<DecoderSelfAttention>,
    mel_proj: Dense,
    stop_proj: Dense,
    postnet: Vec<ConvBlock>,
}

struct DecoderState {
    lstm1: LstmState,
    lstm2: LstmState,
    fa: ForwardAttentionState,
    sa_ctx: Option<Var>,
}

impl Tacotron {
    /// Registers every parameter in `store`, initialised from `seed`.
    pub fn new(variant: ModelVariant, dims: ModelDims, store: &mut ParamStore, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = ParamInit::new(store, &mut rng);
        let d = &dims;
        let sa = variant.is_sa();
        let cond = variant.conditioning;

        let mut enc = init.scope("encoder");
        let embedding = Embedding::new(&mut enc, "embedding", d.n_symbols, d.embed)?;
        let gst = if cond.uses_gst() {
            Some(GlobalStyleTokens::new(
                &mut enc,
                "gst",
                d.n_mels,
                &d.ref_filters,
                d.ref_gru,
                d.gst_tokens,
                d.gst_dim,
                d.gst_heads,
            )?)
        } else {
            None
        };
        let context = match cond.context_mode() {
            Some(mode) => Some(ContextEmbedder::new(&mut enc, "context", mode, d.context)?),
            None => None,
        };
        let conv_in = d.embed + gst.as_ref().map_or(0, |_| d.gst_dim) + context.as_ref().map_or(0, |c| c.dim());
        let mut enc_convs = Vec::with_capacity(d.enc_conv_layers);
        for i in 0..d.enc_conv_layers {
            let input = if i == 0 { conv_in } else { d.enc_conv_filters };
            enc_convs.push(ConvBlock::new(&mut enc, i, input, d.enc_conv_filters, d.enc_conv_kernel)?);
        }
        let enc_lstm = BiLstm::new(&mut enc, "lstm", d.enc_conv_filters, d.enc_lstm)?;
        let enc_out = d.encoder_output_width();
        let enc_sa = if sa {
            Some(EncoderSelfAttention::new(&mut enc, "self_attention", enc_out, d.enc_sa_dim, d.enc_sa_heads, d.sa_dropout)?)
        } else {
            None
        };
        drop(enc);

        let mut dec = init.scope("decoder");
        let prenet = [
            Dense::new(&mut dec, "prenet0", d.n_mels, d.prenet, true)?,
            Dense::new(&mut dec, "prenet1", d.prenet, d.prenet, true)?,
        ];
        let sa_ctx = if sa { d.enc_sa_dim } else { 0 };
        let lstm1 = Lstm::new(&mut dec, "lstm1", d.prenet + enc_out + sa_ctx, d.dec_lstm)?;
        let lstm2 = Lstm::new(&mut dec, "lstm2", d.dec_lstm, d.dec_lstm)?;
        let forward_attention =
            ForwardAttention::new(&mut dec, "forward_attention", d.dec_lstm, enc_out, d.attn_dim, d.prenet)?;
        let sa_attention = if sa {
            Some(AdditiveAttention::new(&mut dec, "sa_attention", d.dec_lstm, d.enc_sa_dim, d.attn_dim)?)
        } else {
            None
        };
        let block = d.decoder_block_width(sa);
        let dec_sa = if sa {
            Some(DecoderSelfAttention::new(&mut dec, "self_attention", block, d.dec_sa_heads, d.sa_dropout)?)
        } else {
            None
        };
        let mel_proj = Dense::new(&mut dec, "mel_proj", block, d.n_mels, true)?;
        let stop_proj = Dense::new(&mut dec, "stop_proj", block, 1, true)?;
        drop(dec);

        let mut post = init.scope("postnet");
        let mut postnet = Vec::with_capacity(d.postnet_layers);
        for i in 0..d.postnet_layers {
            let input = if i == 0 { d.n_mels } else { d.postnet_filters };
            let output = if i + 1 == d.postnet_layers { d.n_mels } else { d.postnet_filters };
            postnet.push(ConvBlock::new(&mut post, i, input, output, d.postnet_kernel)?);
        }

        Ok(Self {
            variant,
            dims,
            embedding,
            gst,
            context,
            enc_convs,
            enc_lstm,
            enc_sa,
            prenet,
            lstm1,
            lstm2,
            forward_attention,
            sa_attention,
            dec_sa,
            mel_proj,
            stop_proj,
            postnet,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn gst(&self) -> Option<&GlobalStyleTokens> {
        self.gst.as_ref()
    }

    pub fn context_embedder(&self) -> Option<&ContextEmbedder> {
        self.context.as_ref()
    }

    /// Width of the decoder block fed to the output projections.
    pub fn decoder_block_width(&self) -> usize {
        self.dims.decoder_block_width(self.variant.is_sa())
    }

    fn style_var(&self, g: &mut Graph, store: &ParamStore, style: StyleSource) -> Result<(Option<Var>, Option<Var>)> {
        let Some(gst) = &self.gst else {
            return Ok((None, None));
        };
        match style {
            StyleSource::None => Err(ModelError::MissingInput("style reference or token weights")),
            StyleSource::Reference(mel) => {
                let n = self.dims.n_mels;
                if mel.is_empty() || mel.len() % n != 0 {
                    return Err(ModelError::DimMismatch { what: "reference mel length", expected: n, actual: mel.len() });
                }
                let r = g.constant(mel.to_vec(), mel.len() / n, n)?;
                let out = gst.forward(g, store, r)?;
                Ok((Some(out.embedding), Some(out.weights)))
            }
            StyleSource::Weights(w) => Ok((Some(gst.tokens.from_weights(g, store, w)?), None)),
        }
    }

    /// Encodes with style and context supplied from `input`. Inputs the
    /// variant does not use are ignored.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, input: &ModelInput) -> Result<Encoded> {
        let (style, weights) = self.style_var(g, store, input.style)?;
        let context = match &self.context {
            Some(c) => {
                let labels = input.labels.ok_or(ModelError::MissingInput("context labels"))?;
                Some(c.forward(g, store, labels)?)
            }
            None => None,
        };
        let mut enc = self.encode_with(g, store, input.phonemes, style, context)?;
        enc.style_weights = weights;
        Ok(enc)
    }

    /// Encodes with explicit `[1, width]` style and context vectors.
    pub fn encode_with(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        phonemes: &[usize],
        style: Option<Var>,
        context: Option<Var>,
    ) -> Result<Encoded> {
        if phonemes.is_empty() {
            return Err(ModelError::EmptyInput("phoneme sequence"));
        }
        if let Some(&bad) = phonemes.iter().find(|&&p| p >= self.dims.n_symbols) {
            return Err(ModelError::DimMismatch { what: "phoneme id", expected: self.dims.n_symbols, actual: bad });
        }
        let t = phonemes.len();
        let mut parts = vec![self.embedding.forward(g, store, phonemes)?];
        for (var, want, what) in [
            (style, self.gst.as_ref().map(|_| self.dims.gst_dim), "style embedding"),
            (context, self.context.as_ref().map(|c| c.dim()), "context embedding"),
        ] {
            match (var, want) {
                (Some(v), Some(w)) => {
                    if g.shape(v) != (1, w) {
                        return Err(ModelError::DimMismatch { what, expected: w, actual: g.cols(v) });
                    }
                    let ones = g.full(t, 1, 1.0);
                    parts.push(g.matmul(ones, v)?);
                }
                (None, Some(_)) => return Err(ModelError::MissingInput(what)),
                (Some(_), None) => return Err(ModelError::UnexpectedInput(what)),
                (None, None) => {}
            }
        }
        let mut x = g.concat_cols(&parts)?;
        let conv_input_width = g.cols(x);
        for block in &self.enc_convs {
            let y = block.forward(g, store, x)?;
            x = g.relu(y);
        }
        let memory = self.enc_lstm.forward(g, store, x, self.dims.zoneout)?;
        let processed = self.forward_attention.process_memory(g, store, memory)?;
        let (sa_memory, processed_sa) = match (&self.enc_sa, &self.sa_attention) {
            (Some(sa), Some(att)) => {
                let (m, _) = sa.forward(g, store, memory)?;
                (Some(m), Some(att.process_memory(g, store, m)?))
            }
            _ => (None, None),
        };
        Ok(Encoded { conv_input_width, memory, processed, sa_memory, processed_sa, style, style_weights: None })
    }

    fn initial_state(&self, g: &mut Graph, enc: &Encoded) -> Result<DecoderState> {
        let t = g.rows(enc.memory);
        Ok(DecoderState {
            lstm1: LstmState::zeros(g, self.dims.dec_lstm),
            lstm2: LstmState::zeros(g, self.dims.dec_lstm),
            fa: self.forward_attention.initial_state(g, t, self.dims.encoder_output_width())?,
            sa_ctx: enc.sa_memory.map(|_| g.zeros(1, self.dims.enc_sa_dim)),
        })
    }

    /// Two ReLU layers, each followed by dropout. Training graphs always
    /// drop; otherwise `force_dropout` applies the same rate explicitly.
    fn prenet(&self, g: &mut Graph, store: &ParamStore, frame: Var, force_dropout: bool) -> Result<Var> {
        let p = self.dims.prenet_dropout;
        let mut x = frame;
        for layer in &self.prenet {
            let y = layer.forward(g, store, x)?;
            let y = g.relu(y);
            x = if g.mode() == Mode::Train {
                g.dropout(y, p)?
            } else if force_dropout && p > 0.0 {
                let keep = 1.0 - p;
                let m = g.bernoulli_mask(1, self.dims.prenet, keep)?;
                let m = g.scale(m, 1.0 / keep);
                g.mul(y, m)?
            } else {
                y
            };
        }
        Ok(x)
    }

    /// One autoregressive step; returns the decoder block row `x_t`.
    fn step(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        enc: &Encoded,
        state: &mut DecoderState,
        prev_frame: Var,
        prenet_dropout: bool,
    ) -> Result<Var> {
        let z = self.dims.zoneout;
        let p = self.prenet(g, store, prev_frame, prenet_dropout)?;
        let mut inputs = vec![p, state.fa.context];
        inputs.extend(state.sa_ctx);
        let lstm_in = g.concat_cols(&inputs)?;
        state.lstm1 = self.lstm1.step(g, store, lstm_in, state.lstm1, z)?;
        state.lstm2 = self.lstm2.step(g, store, state.lstm1.h, state.lstm2, z)?;
        let query = state.lstm2.h;
        state.fa = self.forward_attention.step(g, store, enc.processed, enc.memory, query, p, state.fa)?;
        let mut block = vec![query, state.fa.context];
        if let (Some(att), Some(processed), Some(mem)) = (&self.sa_attention, enc.processed_sa, enc.sa_memory) {
            let (ctx, _) = att.step(g, store, processed, mem, query)?;
            state.sa_ctx = Some(ctx);
            block.push(ctx);
        }
        Ok(g.concat_cols(&block)?)
    }

    /// Residual post-net over `[frames, n_mels]`.
    pub fn postnet(&self, g: &mut Graph, store: &ParamStore, mel: Var) -> Result<Var> {
        let last = self.postnet.len() - 1;
        let mut x = mel;
        for (i, block) in self.postnet.iter().enumerate() {
            let y = block.forward(g, store, x)?;
            let y = if i == last { y } else { g.tanh(y) };
            x = g.dropout(y, self.dims.postnet_dropout)?;
        }
        Ok(g.add(mel, x)?)
    }

    fn check_target(&self, target: &[f64]) -> Result<usize> {
        let n = self.dims.n_mels;
        if target.is_empty() || target.len() % n != 0 {
            return Err(ModelError::DimMismatch { what: "target mel length", expected: n, actual: target.len() });
        }
        Ok(target.len() / n)
    }

    /// Teacher-forced decoding of `target` (`[frames, n_mels]`): step `t`
    /// is fed target frame `t - 1`, and a zero frame at the start.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, input: &ModelInput, target: &[f64]) -> Result<DecoderOutput> {
        let frames = self.check_target(target)?;
        let enc = self.encode(g, store, input)?;
        self.decode_teacher_forced(g, store, &enc, target, frames)
    }

    pub fn decode_teacher_forced(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        enc: &Encoded,
        target: &[f64],
        frames: usize,
    ) -> Result<DecoderOutput> {
        let n = self.dims.n_mels;
        let mut shifted = vec![0.0; frames * n];
        shifted[n..].copy_from_slice(&target[..(frames - 1) * n]);
        let inputs = g.constant(shifted, frames, n)?;
        let mut state = self.initial_state(g, enc)?;
        let mut rows = Vec::with_capacity(frames);
        let mut aligns = Vec::with_capacity(frames);
        for t in 0..frames {
            let prev = g.row(inputs, t)?;
            rows.push(self.step(g, store, enc, &mut state, prev, false)?);
            aligns.push(state.fa.alignment);
        }
        let x = g.concat_rows(&rows)?;
        let block = match &self.dec_sa {
            Some(sa) => sa.forward(g, store, x)?.0,
            None => x,
        };
        let mel_before = self.mel_proj.forward(g, store, block)?;
        let stop_logits = self.stop_proj.forward(g, store, block)?;
        let mel_after = self.postnet(g, store, mel_before)?;
        let alignments = g.concat_rows(&aligns)?;
        Ok(DecoderOutput { mel_before, mel_after, stop_logits, alignments, block })
    }

    /// Teacher-forced training objective.
    pub fn loss(&self, g: &mut Graph, store: &ParamStore, input: &ModelInput, target: &[f64], l2_weight: f64) -> Result<LossTerms> {
        let frames = self.check_target(target)?;
        let out = self.forward(g, store, input, target)?;
        let t = g.constant(target.to_vec(), frames, self.dims.n_mels)?;
        compute_loss(g, store, out.mel_before, out.mel_after, out.stop_logits, t, frames, l2_weight)
    }

    /// Free-running decoding in an eval graph.
    pub fn synthesize(&self, store: &ParamStore, input: &ModelInput, opts: &SynthesisOptions) -> Result<Synthesis> {
        let mut g = Graph::new(Mode::Eval, opts.seed);
        let g = &mut g;
        let enc = self.encode(g, store, input)?;
        let limit = match opts.fixed_frames {
            Some(0) => return Err(ModelError::InvalidConfig("fixed frame count must be positive".into())),
            Some(f) => f,
            None => opts.max_steps.unwrap_or(MAX_STEPS_PER_SYMBOL * input.phonemes.len()).max(1),
        };
        let n = self.dims.n_mels;
        let mut state = self.initial_state(g, &enc)?;
        let mut cache = SelfAttentionCache::default();
        let mut prev = g.zeros(1, n);
        let mut mel_rows = Vec::new();
        let mut stop_probs = Vec::new();
        let mut alignments = Vec::new();
        let mut stopped = false;
        while mel_rows.len() < limit {
            let x = self.step(g, store, &enc, &mut state, prev, opts.prenet_dropout)?;
            let y = match &self.dec_sa {
                Some(sa) => sa.step(g, store, &mut cache, x)?,
                None => x,
            };
            let mel = self.mel_proj.forward(g, store, y)?;
            let stop = self.stop_proj.forward(g, store, y)?;
            let p = 1.0 / (1.0 + (-g.scalar(stop)).exp());
            alignments.extend_from_slice(g.value(state.fa.alignment));
            stop_probs.push(p);
            mel_rows.push(mel);
            prev = mel;
            if opts.fixed_frames.is_none() && p > STOP_THRESHOLD {
                stopped = true;
                break;
            }
        }
        let mel_before = g.concat_rows(&mel_rows)?;
        let mel_after = self.postnet(g, store, mel_before)?;
        let style_weights = enc.style_weights.map(|w| {
            let tokens = g.cols(w);
            g.value(w).chunks(tokens).map(<[f64]>::to_vec).collect()
        });
        Ok(Synthesis {
            n_mels: n,
            mel_before: g.value(mel_before).to_vec(),
            mel: g.value(mel_after).to_vec(),
            stop_probs,
            alignments,
            truncated: opts.fixed_frames.is_none() && !stopped,
            style_weights,
        })
    }
}
