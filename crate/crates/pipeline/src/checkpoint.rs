//! Binary checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! magic    8 bytes  "RKGCKPT\0"
//! version  u32      1
//! count    u32      number of sections
//! section  tag [u8; 4], length u64, digest [u8; 8], payload
//! ```
//!
//! `digest` is the first 8 bytes of SHA-256 over the payload. Sections:
//! `MNFT` (UTF-8 `key=value` lines: variant, every model width, sample rate,
//! fingerprint), `MELS` (normalisation mean and std), `PARM` (named arrays),
//! and optionally `ADAM` (optimizer moments) and `TRNG` (seed and completed
//! epochs). Files are written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rakugo_autodiff::{AdamConfig, AdamState, ParamKind, ParamStore, Tensor};
use rakugo_dsp::MelStats;
use rakugo_frontend::ContextEmbeddingDims;
use rakugo_model::{ModelDims, ModelVariant, Tacotron};
use sha2::{Digest, Sha256};

use crate::error::{io_err, PipelineError, Result};
use crate::model::{fingerprint, TrainedModel};
use crate::train::TrainState;

pub const MAGIC: &[u8; 8] = b"RKGCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: TrainedModel,
    pub state: Option<TrainState>,
}

fn digest(payload: &[u8]) -> [u8; 8] {
    let d = Sha256::digest(payload);
    d[..8].try_into().expect("sha256 is 32 bytes")
}

#[derive(Default)]
struct Buf(Vec<u8>);

impl Buf {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], section: &'static str, path: &'a Path) -> Self {
        Self { data, pos: 0, section, path }
    }

    fn corrupt(&self, reason: impl Into<String>) -> PipelineError {
        PipelineError::CorruptCheckpoint { path: self.path.to_path_buf(), section: self.section.into(), reason: reason.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len()).ok_or_else(|| self.corrupt("truncated"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem).is_none_or(|b| b > self.data.len() - self.pos) {
            return Err(self.corrupt(format!("length {n} exceeds the section")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        Ok(self.take(n * 8)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.corrupt("invalid UTF-8"))
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.corrupt(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

fn manifest_text(model: &TrainedModel) -> String {
    let d = model.dims();
    let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let mut lines = vec![
        format!("variant={}", model.variant()),
        format!("sample_rate={}", model.sample_rate),
        format!("fingerprint={}", model.fingerprint()),
    ];
    let usizes = [
        ("n_symbols", d.n_symbols),
        ("embed", d.embed),
        ("enc_conv_filters", d.enc_conv_filters),
        ("enc_conv_kernel", d.enc_conv_kernel),
        ("enc_conv_layers", d.enc_conv_layers),
        ("enc_lstm", d.enc_lstm),
        ("enc_sa_dim", d.enc_sa_dim),
        ("enc_sa_heads", d.enc_sa_heads),
        ("prenet", d.prenet),
        ("dec_lstm", d.dec_lstm),
        ("attn_dim", d.attn_dim),
        ("dec_sa_heads", d.dec_sa_heads),
        ("postnet_filters", d.postnet_filters),
        ("postnet_kernel", d.postnet_kernel),
        ("postnet_layers", d.postnet_layers),
        ("n_mels", d.n_mels),
        ("gst_tokens", d.gst_tokens),
        ("gst_dim", d.gst_dim),
        ("gst_heads", d.gst_heads),
        ("ref_gru", d.ref_gru),
        ("context_attr", d.context.attr),
    ];
    lines.extend(usizes.iter().map(|(k, v)| format!("{k}={v}")));
    lines.push(format!("ref_filters={}", list(&d.ref_filters)));
    lines.push(format!("context_all={}", list(&d.context.all)));
    for (k, v) in [
        ("prenet_dropout", d.prenet_dropout),
        ("postnet_dropout", d.postnet_dropout),
        ("sa_dropout", d.sa_dropout),
        ("zoneout", d.zoneout),
    ] {
        // exact round trip
        lines.push(format!("{k}={:016x}", v.to_bits()));
    }
    lines.join("\n") + "\n"
}

fn parse_manifest(text: &str, path: &Path) -> Result<(ModelVariant, ModelDims, u32, String)> {
    let corrupt = |reason: String| PipelineError::CorruptCheckpoint { path: path.to_path_buf(), section: "MNFT".into(), reason };
    let kv: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| corrupt(format!("missing key {k}")));
    let num = |k: &str| get(k)?.parse::<usize>().map_err(|_| corrupt(format!("bad value for {k}")));
    let bits = |k: &str| u64::from_str_radix(get(k)?, 16).map(f64::from_bits).map_err(|_| corrupt(format!("bad value for {k}")));
    let list = |k: &str| -> Result<Vec<usize>> {
        get(k)?.split(',').map(|s| s.parse::<usize>().map_err(|_| corrupt(format!("bad value for {k}")))).collect()
    };
    let variant: ModelVariant = get("variant")?.parse().map_err(|e| corrupt(format!("{e}")))?;
    let all: [usize; 9] = list("context_all")?.try_into().map_err(|_| corrupt("context_all needs 9 widths".into()))?;
    let dims = ModelDims {
        n_symbols: num("n_symbols")?,
        embed: num("embed")?,
        enc_conv_filters: num("enc_conv_filters")?,
        enc_conv_kernel: num("enc_conv_kernel")?,
        enc_conv_layers: num("enc_conv_layers")?,
        enc_lstm: num("enc_lstm")?,
        enc_sa_dim: num("enc_sa_dim")?,
        enc_sa_heads: num("enc_sa_heads")?,
        prenet: num("prenet")?,
        dec_lstm: num("dec_lstm")?,
        attn_dim: num("attn_dim")?,
        dec_sa_heads: num("dec_sa_heads")?,
        postnet_filters: num("postnet_filters")?,
        postnet_kernel: num("postnet_kernel")?,
        postnet_layers: num("postnet_layers")?,
        n_mels: num("n_mels")?,
        gst_tokens: num("gst_tokens")?,
        gst_dim: num("gst_dim")?,
        gst_heads: num("gst_heads")?,
        ref_filters: list("ref_filters")?,
        ref_gru: num("ref_gru")?,
        context: ContextEmbeddingDims { attr: num("context_attr")?, all },
        prenet_dropout: bits("prenet_dropout")?,
        postnet_dropout: bits("postnet_dropout")?,
        sa_dropout: bits("sa_dropout")?,
        zoneout: bits("zoneout")?,
    };
    let rate = get("sample_rate")?.parse::<u32>().map_err(|_| corrupt("bad sample_rate".into()))?;
    Ok((variant, dims, rate, get("fingerprint")?.to_string()))
}

fn kind_code(k: ParamKind) -> u8 {
    match k {
        ParamKind::Weight => 0,
        ParamKind::Bias => 1,
        ParamKind::Norm => 2,
        ParamKind::Buffer => 3,
    }
}

fn encode(model: &TrainedModel, state: Option<&TrainState>) -> Vec<u8> {
    let mut sections: Vec<(&[u8; 4], Vec<u8>)> = Vec::new();
    sections.push((b"MNFT", manifest_text(model).into_bytes()));

    let mut b = Buf::default();
    b.f64s(&model.mel_stats.mean);
    b.f64s(&model.mel_stats.std);
    sections.push((b"MELS", b.0));

    let mut b = Buf::default();
    b.u64(model.store.len() as u64);
    for (_, p) in model.store.iter() {
        b.str(&p.name);
        b.u8(kind_code(p.kind));
        b.u8(p.tensor.requires_grad() as u8);
        b.u32(p.tensor.shape().len() as u32);
        for &d in p.tensor.shape() {
            b.u64(d as u64);
        }
        b.f64s(p.tensor.values());
    }
    sections.push((b"PARM", b.0));

    if let Some(s) = state {
        let mut b = Buf::default();
        let c = &s.adam.config;
        b.f64s(&[c.learning_rate, c.beta1, c.beta2, c.epsilon]);
        b.u64(s.adam.step);
        b.u64(s.adam.first_moment.len() as u64);
        for (m, v) in s.adam.first_moment.iter().zip(&s.adam.second_moment) {
            b.f64s(m);
            b.f64s(v);
        }
        sections.push((b"ADAM", b.0));
        let mut b = Buf::default();
        b.u64(s.seed);
        b.u64(s.epochs_done as u64);
        sections.push((b"TRNG", b.0));
    }

    let mut out = Buf::default();
    out.0.extend_from_slice(MAGIC);
    out.u32(VERSION);
    out.u32(sections.len() as u32);
    for (tag, payload) in sections {
        out.0.extend_from_slice(tag);
        out.u64(payload.len() as u64);
        out.0.extend_from_slice(&digest(&payload));
        out.0.extend_from_slice(&payload);
    }
    out.0
}

/// Atomically writes `model` (and the optimizer position, if given) to `path`.
pub fn save_checkpoint(path: &Path, model: &TrainedModel, state: Option<&TrainState>) -> Result<()> {
    let bytes = encode(model, state);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(&bytes).map_err(io_err(tmp.path()))?;
    tmp.as_file().sync_all().map_err(io_err(tmp.path()))?;
    tmp.persist(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes, path)
}

/// Loads and refuses a checkpoint whose architecture fingerprint differs from `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &str) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    let found = ck.model.fingerprint();
    if found != expected {
        return Err(PipelineError::FingerprintMismatch { expected: expected.to_string(), found });
    }
    Ok(ck)
}

fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, "header", path);
    if r.take(8).ok() != Some(&MAGIC[..]) {
        return Err(r.corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut sections: BTreeMap<[u8; 4], &[u8]> = BTreeMap::new();
    for _ in 0..count {
        r.section = "header";
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let name = String::from_utf8_lossy(&tag).into_owned();
        let len = r.u64()? as usize;
        let dg: [u8; 8] = r.take(8)?.try_into().unwrap();
        let payload = r.take(len).map_err(|_| PipelineError::CorruptCheckpoint {
            path: path.to_path_buf(),
            section: name.clone(),
            reason: format!("truncated: {len} bytes declared"),
        })?;
        if digest(payload) != dg {
            return Err(PipelineError::CorruptCheckpoint { path: path.to_path_buf(), section: name, reason: "digest mismatch".into() });
        }
        sections.insert(tag, payload);
    }
    r.done()?;
    let section = |tag: &[u8; 4], name: &'static str| {
        sections.get(tag).copied().ok_or_else(|| PipelineError::CorruptCheckpoint {
            path: path.to_path_buf(),
            section: name.into(),
            reason: "missing".into(),
        })
    };

    let text = std::str::from_utf8(section(b"MNFT", "MNFT")?).map_err(|_| PipelineError::CorruptCheckpoint {
        path: path.to_path_buf(),
        section: "MNFT".into(),
        reason: "invalid UTF-8".into(),
    })?;
    let (variant, dims, sample_rate, stored_fp) = parse_manifest(text, path)?;
    let fp = fingerprint(variant, &dims, sample_rate);
    if fp != stored_fp {
        return Err(PipelineError::CorruptCheckpoint {
            path: path.to_path_buf(),
            section: "MNFT".into(),
            reason: format!("stored fingerprint {stored_fp} does not match its own fields ({fp})"),
        });
    }

    let mut r = Reader::new(section(b"MELS", "MELS")?, "MELS", path);
    let mel_stats = MelStats { mean: r.f64s()?, std: r.f64s()? };
    r.done()?;
    if mel_stats.mean.len() != dims.n_mels || mel_stats.std.len() != dims.n_mels {
        return Err(r.corrupt("statistics do not match n_mels"));
    }

    let mut store = ParamStore::new();
    let net = Tacotron::new(variant, dims, &mut store, 0).map_err(|e| PipelineError::CorruptCheckpoint {
        path: path.to_path_buf(),
        section: "MNFT".into(),
        reason: e.to_string(),
    })?;
    let mut r = Reader::new(section(b"PARM", "PARM")?, "PARM", path);
    let n = r.u64()? as usize;
    if n != store.len() {
        return Err(r.corrupt(format!("{n} arrays, model has {}", store.len())));
    }
    for _ in 0..n {
        let name = r.str()?;
        let kind = r.u8()?;
        let requires_grad = r.u8()? != 0;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let values = r.f64s()?;
        let id = store.id(&name).ok_or_else(|| r.corrupt(format!("unknown array {name}")))?;
        let p = store.param(id);
        if kind_code(p.kind) != kind || p.tensor.shape() != shape.as_slice() {
            return Err(r.corrupt(format!("array {name} has kind {kind} shape {shape:?}, expected {:?} {:?}", p.kind, p.tensor.shape())));
        }
        let t = Tensor::new(shape, values).map_err(|e| r.corrupt(e.to_string()))?.with_requires_grad(requires_grad);
        *store.get_mut(id) = t;
    }
    r.done()?;

    let state = match (sections.get(b"ADAM"), sections.get(b"TRNG")) {
        (Some(adam), Some(trng)) => {
            let mut r = Reader::new(adam, "ADAM", path);
            let c = r.f64s()?;
            if c.len() != 4 {
                return Err(r.corrupt("config needs 4 values"));
            }
            let config = AdamConfig { learning_rate: c[0], beta1: c[1], beta2: c[2], epsilon: c[3] };
            let step = r.u64()?;
            let k = r.u64()? as usize;
            if k != store.len() {
                return Err(r.corrupt(format!("{k} moment arrays, model has {}", store.len())));
            }
            let mut first_moment = Vec::with_capacity(k);
            let mut second_moment = Vec::with_capacity(k);
            for (_, p) in store.iter() {
                let (m, v) = (r.f64s()?, r.f64s()?);
                if m.len() != p.tensor.len() || v.len() != p.tensor.len() {
                    return Err(r.corrupt(format!("moments of {} have the wrong length", p.name)));
                }
                first_moment.push(m);
                second_moment.push(v);
            }
            r.done()?;
            let mut r = Reader::new(trng, "TRNG", path);
            let seed = r.u64()?;
            let epochs_done = r.u64()? as usize;
            r.done()?;
            Some(TrainState { adam: AdamState { config, step, first_moment, second_moment }, epochs_done, seed })
        }
        (None, None) => None,
        _ => {
            return Err(PipelineError::CorruptCheckpoint {
                path: path.to_path_buf(),
                section: "ADAM".into(),
                reason: "optimizer and RNG sections must appear together".into(),
            })
        }
    };

    Ok(Checkpoint { model: TrainedModel { net, store, mel_stats, sample_rate }, state })
}
