use std::fmt;
use std::str::FromStr;

use rakugo_frontend::{ContextEmbeddingDims, ContextMode, NUM_SYMBOLS};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backbone {
    Tacotron2,
    SaTacotron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conditioning {
    None,
    Gst,
    Attr,
    Context,
    GstAttr,
    GstContext,
}

impl Conditioning {
    pub const ALL: [Conditioning; 6] = [
        Conditioning::None,
        Conditioning::Gst,
        Conditioning::Attr,
        Conditioning::Context,
        Conditioning::GstAttr,
        Conditioning::GstContext,
    ];

    pub fn uses_gst(self) -> bool {
        matches!(self, Conditioning::Gst | Conditioning::GstAttr | Conditioning::GstContext)
    }

    pub fn context_mode(self) -> Option<ContextMode> {
        match self {
            Conditioning::Attr | Conditioning::GstAttr => Some(ContextMode::Attr),
            Conditioning::Context | Conditioning::GstContext => Some(ContextMode::All),
            _ => None,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Conditioning::None => "",
            Conditioning::Gst => "-GST-8",
            Conditioning::Attr => "-ATTR",
            Conditioning::Context => "-context",
            Conditioning::GstAttr => "-GST-8-ATTR",
            Conditioning::GstContext => "-GST-8-context",
        }
    }
}

/// One of the twelve backbone/conditioning combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelVariant {
    pub backbone: Backbone,
    pub conditioning: Conditioning,
}

impl ModelVariant {
    pub fn new(backbone: Backbone, conditioning: Conditioning) -> Self {
        Self { backbone, conditioning }
    }

    pub fn all() -> Vec<ModelVariant> {
        [Backbone::Tacotron2, Backbone::SaTacotron]
            .into_iter()
            .flat_map(|b| Conditioning::ALL.into_iter().map(move |c| ModelVariant::new(b, c)))
            .collect()
    }

    pub fn is_sa(self) -> bool {
        self.backbone == Backbone::SaTacotron
    }

    pub fn name(self) -> String {
        let base = match self.backbone {
            Backbone::Tacotron2 => "Tacotron",
            Backbone::SaTacotron => "SA-Tacotron",
        };
        format!("{base}{}", self.conditioning.suffix())
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = ModelError;

    /// Case-insensitive; `Tacotron2` is accepted for `Tacotron`.
    fn from_str(s: &str) -> Result<Self> {
        let want = s.trim().to_ascii_lowercase().replace("tacotron2", "tacotron");
        ModelVariant::all()
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase() == want)
            .ok_or_else(|| ModelError::UnknownVariant(s.to_string()))
    }
}

/// Every layer width and regularisation constant of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    pub n_symbols: usize,
    pub embed: usize,
    pub enc_conv_filters: usize,
    pub enc_conv_kernel: usize,
    pub enc_conv_layers: usize,
    /// Units per direction.
    pub enc_lstm: usize,
    pub enc_sa_dim: usize,
    pub enc_sa_heads: usize,
    pub prenet: usize,
    pub dec_lstm: usize,
    pub attn_dim: usize,
    pub dec_sa_heads: usize,
    pub postnet_filters: usize,
    pub postnet_kernel: usize,
    pub postnet_layers: usize,
    pub n_mels: usize,
    pub gst_tokens: usize,
    pub gst_dim: usize,
    pub gst_heads: usize,
    pub ref_filters: Vec<usize>,
    pub ref_gru: usize,
    pub context: ContextEmbeddingDims,
    pub prenet_dropout: f64,
    pub postnet_dropout: f64,
    pub sa_dropout: f64,
    pub zoneout: f64,
}

impl ModelDims {
    pub fn paper() -> Self {
        Self {
            n_symbols: NUM_SYMBOLS,
            embed: 512,
            enc_conv_filters: 512,
            enc_conv_kernel: 5,
            enc_conv_layers: 3,
            enc_lstm: 256,
            enc_sa_dim: 32,
            enc_sa_heads: 2,
            prenet: 256,
            dec_lstm: 1024,
            attn_dim: 128,
            dec_sa_heads: 2,
            postnet_filters: 512,
            postnet_kernel: 5,
            postnet_layers: 5,
            n_mels: 80,
            gst_tokens: 10,
            gst_dim: 512,
            gst_heads: 8,
            ref_filters: vec![128, 128, 256, 256, 512, 512],
            ref_gru: 128,
            context: ContextEmbeddingDims::FULL,
            prenet_dropout: 0.5,
            postnet_dropout: 0.5,
            sa_dropout: 0.05,
            zoneout: 0.1,
        }
    }

    /// Shrinks every hidden width by `factor`; the mel and context widths
    /// are data-defined and stay fixed. Head splits are rounded up to stay divisible.
    pub fn scaled(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(ModelError::InvalidConfig(format!("scale factor {factor} outside (0, 1]")));
        }
        let p = Self::paper();
        let s = |w: usize| ((w as f64 * factor).round() as usize).max(1);
        let s_div = |w: usize, d: usize| s(w).div_ceil(d) * d;
        Ok(Self {
            embed: s(p.embed),
            enc_conv_filters: s(p.enc_conv_filters),
            enc_lstm: s(p.enc_lstm),
            enc_sa_dim: s_div(p.enc_sa_dim, p.enc_sa_heads),
            prenet: s(p.prenet),
            dec_lstm: s(p.dec_lstm),
            attn_dim: s(p.attn_dim),
            postnet_filters: s(p.postnet_filters),
            gst_dim: s_div(p.gst_dim, p.gst_heads),
            ref_filters: p.ref_filters.iter().map(|&f| s(f)).collect(),
            ref_gru: s(p.ref_gru),
            ..p
        })
    }

    /// Every width at most 8, for finite-difference checks.
    pub fn miniature() -> Self {
        Self {
            embed: 4,
            enc_conv_filters: 4,
            enc_conv_layers: 3,
            enc_lstm: 3,
            enc_sa_dim: 4,
            prenet: 4,
            dec_lstm: 4,
            attn_dim: 3,
            postnet_filters: 4,
            n_mels: 6,
            gst_dim: 8,
            ref_filters: vec![2, 2, 3, 3, 4, 4],
            ref_gru: 3,
            context: ContextEmbeddingDims::TINY,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        let widths = [
            self.embed,
            self.enc_conv_filters,
            self.enc_conv_layers,
            self.enc_lstm,
            self.enc_sa_dim,
            self.prenet,
            self.dec_lstm,
            self.attn_dim,
            self.postnet_filters,
            self.postnet_layers,
            self.n_mels,
            self.gst_tokens,
            self.gst_dim,
            self.ref_gru,
        ];
        if widths.contains(&0) || self.ref_filters.is_empty() || self.ref_filters.contains(&0) {
            return bad("all widths must be positive".into());
        }
        if self.postnet_layers < 2 {
            return bad("post-net needs at least two layers".into());
        }
        if self.enc_sa_heads == 0 || self.enc_sa_dim % self.enc_sa_heads != 0 {
            return bad(format!("{} encoder self-attention heads do not divide {}", self.enc_sa_heads, self.enc_sa_dim));
        }
        let w = self.decoder_block_width(true);
        if self.dec_sa_heads == 0 || w % self.dec_sa_heads != 0 {
            return bad(format!("{} decoder self-attention heads do not divide {w}", self.dec_sa_heads));
        }
        crate::gst::check_heads(self.gst_dim, self.gst_heads)?;
        if self.enc_conv_kernel % 2 == 0 || self.postnet_kernel % 2 == 0 {
            return bad("convolution kernels must be odd".into());
        }
        for p in [self.prenet_dropout, self.postnet_dropout, self.sa_dropout, self.zoneout] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn encoder_output_width(&self) -> usize {
        2 * self.enc_lstm
    }

    /// Decoder LSTM output plus the attention contexts.
    pub fn decoder_block_width(&self, sa: bool) -> usize {
        self.dec_lstm + self.encoder_output_width() + if sa { self.enc_sa_dim } else { 0 }
    }

    /// Frames the reference encoder needs: one halving per conv layer.
    pub fn reference_min_frames(&self) -> usize {
        1 << self.ref_filters.len()
    }
}
