//! Acceptance criteria. Every test writes exactly one `PASS` or `FAIL` line
//! to stderr (bypassing the harness capture) and then asserts the outcome.

mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{tiny_config, tiny_data};
use rakugo_autodiff::{grad_check, GradCheckOptions, Graph, Mode, ParamKind, ParamStore, Parallelism};
use rakugo_dsp::{
    active_level, estimate_f0, level_normalize, mel_spectrogram, GriffinLim, MelConfig, Waveform, DEFAULT_ITERATIONS,
    TARGET_DBOV,
};
use rakugo_frontend::{
    generate_synthetic_corpus, generate_synthetic_corpus_with, ContextLabels, LabelField, SyntheticCorpusConfig,
};
use rakugo_model::{
    expected_position, forward_attention_step, initial_alignment, ModelDims, ModelInput, ModelVariant, StyleSource,
    SynthesisOptions, Tacotron, DEFAULT_L2_WEIGHT,
};
use rakugo_pipeline::{load_checkpoint, save_checkpoint, train, Dataset, TrainConfig, Trainer};
use rakugo_stats::{
    brunner_munzel, normalize_scores, ols_regression, pearson_r, standardize_listeners, Question, ScoreRecord, ScoreTable,
    REFERENCE_SYSTEM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const COND_SEED: u64 = 1;
const COND_UTTERANCES: usize = 60;
const COND_EPOCHS: usize = 60;
const COND_BATCH: usize = 4;

fn verdict(criterion: &str, ok: bool, detail: &str) {
    let line = format!("{} {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{criterion}: {detail}");
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn labels() -> ContextLabels {
    ContextLabels::default()
        .with(LabelField::Gender, "female")
        .unwrap()
        .with(LabelField::Condition, "happy")
        .unwrap()
}

#[test]
fn gradient_integrity() {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut coords = 0;
    for variant in ModelVariant::all() {
        let mut store = ParamStore::new();
        let model = Tacotron::new(variant, ModelDims::miniature(), &mut store, 21).unwrap();
        // keep pre-net ReLUs fed by the zero go frame off their kink
        let biases: Vec<_> = store.iter().filter(|(_, p)| p.kind == ParamKind::Bias).map(|(id, _)| id).collect();
        for (k, id) in biases.into_iter().enumerate() {
            let t = store.get_mut(id);
            let noise = uniform(&mut ChaCha8Rng::seed_from_u64(100 + k as u64), t.len(), 0.1);
            t.values_mut().iter_mut().zip(noise).for_each(|(v, n)| *v += n);
        }
        let target = uniform(&mut ChaCha8Rng::seed_from_u64(22), 4 * 6, 1.0);
        let reference = uniform(&mut ChaCha8Rng::seed_from_u64(25), 256 * 6, 1.0);
        let labels = labels();
        let opts = GradCheckOptions { eps: 1e-5, max_coords_per_param: None, seed: 23 };
        let report = grad_check(&mut store, opts, |s| {
            let mut g = Graph::new(Mode::Train, 24);
            let input = ModelInput::new(&[5, 0, 12, 3]).with_labels(&labels).with_style(StyleSource::Reference(&reference));
            let terms = model.loss(&mut g, s, &input, &target, DEFAULT_L2_WEIGHT).expect("loss");
            Ok((g, terms.total))
        })
        .unwrap();
        coords += report.coords_checked;
        if report.max_rel_error > worst.0 {
            worst = (report.max_rel_error, format!("{variant} {}", report.worst.unwrap_or_default()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "gradient integrity",
        worst.0 < 1e-4 && secs < 300.0,
        &format!("12 variants, {coords} coordinates, worst relative error {:.2e} ({}), {secs:.0} s", worst.0, worst.1),
    );
}

#[test]
fn architecture_shape_conformance() {
    let dims = ModelDims::paper();
    let mut store = ParamStore::new();
    let sa = Tacotron::new("SA-Tacotron-GST-8-context".parse().unwrap(), dims.clone(), &mut store, 1).unwrap();
    let reference = vec![0.1; 70 * 80];
    let labels = labels();
    let input = ModelInput::new(&[5, 0, 12, 3, 41, 7, 1]).with_labels(&labels).with_style(StyleSource::Reference(&reference));
    let mut g = Graph::new(Mode::Eval, 0);
    let enc = sa.encode(&mut g, &store, &input).unwrap();
    let gst = sa.gst().unwrap();
    let mut attr_store = ParamStore::new();
    let attr = Tacotron::new("Tacotron-ATTR".parse().unwrap(), dims, &mut attr_store, 2).unwrap();

    let checks: Vec<(&str, usize, usize)> = vec![
        ("encoder LSTM stream", g.shape(enc.memory).1, 512),
        ("SA stream", g.shape(enc.sa_memory.unwrap()).1, 32),
        ("decoder SA width", sa.decoder_block_width(), 1568),
        ("decoder SA projection", store.by_name("decoder.self_attention.dense.weight").unwrap().shape()[0], 1568),
        ("GST tokens", store.by_name("encoder.gst.tokens.tokens").unwrap().shape()[0], 10),
        ("GST token width", store.by_name("encoder.gst.tokens.tokens").unwrap().shape()[1], 512),
        ("GST heads", g.shape(enc.style_weights.unwrap()).0, 8),
        ("GST head width", gst.tokens.head_dim(), 64),
        ("ATTR embedding", attr.context_embedder().unwrap().dim(), 4),
        ("context embedding", sa.context_embedder().unwrap().dim(), 68),
    ];
    let bad: Vec<String> =
        checks.iter().filter(|(_, got, want)| got != want).map(|(n, got, want)| format!("{n} {got} != {want}")).collect();
    let detail = if bad.is_empty() {
        checks.iter().map(|(n, got, _)| format!("{n} {got}")).collect::<Vec<_>>().join(", ")
    } else {
        bad.join("; ")
    };
    verdict("architecture shapes", bad.is_empty(), &detail);
}

#[test]
fn forward_attention_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_norm = 0.0f64;
    let mut decreasing = 0;
    let mut first_violation = None;
    for trial in 0..1000 {
        let len = rng.random_range(2..=12);
        let mut alpha = initial_alignment(len);
        let mut violated = false;
        for _ in 0..20 {
            let u = rng.random_range(0.0..=1.0);
            let y = distribution(&mut rng, len);
            let next = forward_attention_step(&alpha, u, &y).unwrap();
            worst_norm = worst_norm.max((next.iter().sum::<f64>() - 1.0).abs());
            if expected_position(&next) < expected_position(&alpha) - 1e-12 {
                violated = true;
                first_violation.get_or_insert((trial, expected_position(&alpha), expected_position(&next)));
            }
            alpha = next;
        }
        decreasing += violated as usize;
    }

    // the alignments of a real decoder pass are normalised too
    let data = tiny_data(12, 3);
    let model = train(&data, "Tacotron".parse().unwrap(), &tiny_config(1)).unwrap().model;
    let opts = SynthesisOptions { max_steps: Some(40), prenet_dropout: false, seed: 0, fixed_frames: None };
    let (out, _) = model.synthesize_example(&data.test[0], &opts).unwrap();
    let t = data.test[0].phonemes.len();
    for row in out.alignments.chunks(t) {
        worst_norm = worst_norm.max((row.iter().sum::<f64>() - 1.0).abs());
    }

    let mut fixed = true;
    for _ in 0..100 {
        let len = rng.random_range(2..=12);
        let at = rng.random_range(0..len);
        let mut one_hot = vec![0.0; len];
        one_hot[at] = 1.0;
        let mut a = one_hot.clone();
        for _ in 0..20 {
            a = forward_attention_step(&a, 0.0, &distribution(&mut rng, len)).unwrap();
        }
        fixed &= a == one_hot;
    }

    let ok = worst_norm <= 1e-6 && decreasing == 0 && fixed;
    let mut detail = format!(
        "max |sum - 1| {worst_norm:.1e}; expected position decreased in {decreasing}/1000 random sequences; u=0 one-hot fixed: {fixed}"
    );
    if let Some((trial, before, after)) = first_violation {
        detail += &format!(" (first: sequence {trial}, {before:.3} -> {after:.3})");
    }
    verdict("forward attention", ok, &detail);
}

#[test]
fn overfit_capability() {
    let start = Instant::now();
    // twelve utterances leave ten in the training partition
    let corpus = generate_synthetic_corpus(1, 12, 6..=12).unwrap();
    let data = Dataset::from_synthetic(&corpus, Parallelism::default()).unwrap();
    let cfg =
        TrainConfig { scale: 1.0 / 16.0, epochs: 200, batch_size: 2, learning_rate: 2e-3, lr_decay: 1.0, ..TrainConfig::desk() };
    let out = train(&data, "Tacotron".parse().unwrap(), &cfg).unwrap();
    let losses = out.history.train_losses();
    let ratio = losses[199] / losses[0];

    let mut single = data.clone();
    single.truncate_train(1);
    let cfg = TrainConfig { epochs: 3000, batch_size: 1, learning_rate: 3e-3, ..cfg };
    let model = train(&single, "Tacotron".parse().unwrap(), &cfg).unwrap().model;
    let ex = &single.train[0];
    let opts = SynthesisOptions { max_steps: None, prenet_dropout: false, seed: 0, fixed_frames: Some(ex.frames) };
    let (syn, _) = model.synthesize_example(ex, &opts).unwrap();
    let mse = syn.mel.iter().zip(&ex.mel).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / ex.mel.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "overfit",
        ratio < 0.25 && mse < 0.05 && secs < 1800.0,
        &format!(
            "{} training utterances: loss {:.3} -> {:.3} after 200 epochs ({:.1}% of epoch 1); single-utterance resynthesis MSE {mse:.4}; {secs:.0} s",
            data.train.len(),
            losses[0],
            losses[199],
            100.0 * ratio
        ),
    );
}

#[test]
fn conditioning_efficacy() {
    let start = Instant::now();
    // labels change register and tempo only; condition, distance and the rest stay neutral
    let cfg = SyntheticCorpusConfig { register_only: true, ..SyntheticCorpusConfig::new(COND_SEED, COND_UTTERANCES, 6..=12) };
    let corpus = generate_synthetic_corpus_with(&cfg).unwrap();
    let data = Dataset::from_synthetic(&corpus, Parallelism::default()).unwrap();
    let cfg = TrainConfig {
        scale: 1.0 / 16.0,
        epochs: COND_EPOCHS,
        batch_size: COND_BATCH,
        learning_rate: 2e-3,
        lr_decay: 1.0,
        ..TrainConfig::desk()
    };
    let final_val = |v: &str| *train(&data, v.parse().unwrap(), &cfg).unwrap().history.validation_losses().last().unwrap();
    let plain = final_val("Tacotron");
    let attr = final_val("Tacotron-ATTR");
    let margin = (plain - attr) / plain;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "conditioning",
        margin >= 0.05,
        &format!(
            "{} training / {} validation utterances, {COND_EPOCHS} epochs each: final validation loss Tacotron {plain:.4}, \
             Tacotron-ATTR {attr:.4}, margin {:.1}% (need 5%); {secs:.0} s",
            data.train.len(),
            data.validation.len(),
            100.0 * margin
        ),
    );
}

/// Frame count, sine pitch, Griffin-Lim pitch and level normalisation.
#[test]
fn dsp_correctness() {
    let cfg = MelConfig::for_rate(16000).unwrap();
    let (len, shift) = (cfg.stft.frame_length, cfg.stft.frame_shift);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut frame_errors = 0;
    for _ in 0..200 {
        let n = rng.random_range(len..40_000);
        let wav = Waveform::new(16000, uniform(&mut rng, n, 0.5)).unwrap();
        frame_errors += (mel_spectrogram(&wav, &cfg).unwrap().frames() != 1 + (n - len) / shift) as usize;
    }

    let sr = 16000.0;
    let sine = |f: f64, amp: f64, secs: f64| {
        let n = (sr * secs) as usize;
        Waveform::new(16000, (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / sr).sin()).collect()).unwrap()
    };
    let track = estimate_f0(&sine(220.0, 0.5, 1.0));
    let voiced: Vec<f64> = track.voiced().collect();
    let f0_err = voiced.iter().map(|f| (f - 220.0).abs()).fold(0.0, f64::max);
    let f0_ok = !voiced.is_empty() && voiced.len() == track.values.len() && f0_err <= 2.0;

    let gl = GriffinLim::new(cfg.clone()).unwrap();
    let rec = gl.reconstruct(&mel_spectrogram(&sine(220.0, 0.5, 1.0), &cfg).unwrap(), DEFAULT_ITERATIONS).unwrap();
    let n_fft = cfg.stft.n_fft;
    let seg = &rec.waveform.samples()[2000..2000 + n_fft];
    // direct DFT, independent of the FFT inside the crate
    let peak_bin = (1..n_fft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in seg.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (k * n) as f64 / n_fft as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let peak_hz = peak_bin as f64 * sr / n_fft as f64;
    let bin_hz = sr / n_fft as f64;

    let mut level_err = 0.0f64;
    let mut idem_err = 0.0f64;
    for k in 0..5 {
        let mut x = uniform(&mut rng, 16000, 0.05 + 0.2 * k as f64);
        x[..4000].iter_mut().for_each(|v| *v *= 0.01);
        let wav = Waveform::new(16000, x).unwrap();
        let once = level_normalize(&wav, TARGET_DBOV).unwrap();
        let twice = level_normalize(&once, TARGET_DBOV).unwrap();
        let l1 = active_level(&once).unwrap();
        level_err = level_err.max((l1 - TARGET_DBOV).abs());
        idem_err = idem_err.max((active_level(&twice).unwrap() - l1).abs());
    }

    let ok = frame_errors == 0 && f0_ok && (peak_hz - 220.0).abs() <= bin_hz && level_err <= 0.1 && idem_err <= 0.01;
    verdict(
        "DSP",
        ok,
        &format!(
            "frame count wrong on {frame_errors}/200 lengths; f0 max error {f0_err:.2} Hz over {} voiced of {} frames; \
             Griffin-Lim peak {peak_hz:.1} Hz (bin {bin_hz:.1} Hz); level error {level_err:.3} dB, repeat drift {idem_err:.4} dB",
            voiced.len(),
            track.values.len()
        ),
    );
}

/// Brunner-Munzel statistic from placements: the position of each value
/// among the other sample, ties counting one half.
fn bm_statistic(x: &[f64], y: &[f64]) -> f64 {
    let place = |v: f64, other: &[f64]| other.iter().map(|o| if *o < v { 1.0 } else if *o == v { 0.5 } else { 0.0 }).sum::<f64>();
    let p: Vec<f64> = x.iter().map(|v| place(*v, y)).collect();
    let q: Vec<f64> = y.iter().map(|v| place(*v, x)).collect();
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let num = n1 * n2 * (mean(&q) - mean(&p) + (n2 - n1) / 2.0);
    let den = (n1 + n2) * (n1 * var(&p) + n2 * var(&q)).sqrt();
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Two-sided p-value of the studentised statistic over every relabelling.
fn permutation_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let observed = bm_statistic(x, y).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let (a, b): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
            pooled.iter().copied().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let a: Vec<f64> = a.into_iter().map(|(_, v)| v).collect();
        let b: Vec<f64> = b.into_iter().map(|(_, v)| v).collect();
        total += 1;
        hits += (bm_statistic(&a, &b).abs() >= observed - 1e-12) as u64;
    }
    hits as f64 / total as f64
}

fn closed_form(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (sxy / (sxx * syy).sqrt(), slope, my - slope * mx)
}

#[test]
fn statistics_oracle_equivalence() {
    // the family is fixed: one tied MOS-like pair and ten seeded normal pairs
    let mut cases: Vec<(Vec<f64>, Vec<f64>)> =
        vec![(vec![1., 2., 2., 3., 3., 3., 4., 5.], vec![2., 3., 4., 4., 4., 5., 5., 5.])];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (nx, ny) = (Normal::new(0.0, 1.0).unwrap(), Normal::new(0.5, 1.0).unwrap());
    for _ in 0..10 {
        cases.push(((0..8).map(|_| nx.sample(&mut rng)).collect(), (0..8).map(|_| ny.sample(&mut rng)).collect()));
    }
    let gaps: Vec<f64> =
        cases.iter().map(|(x, y)| (brunner_munzel(x, y).unwrap().p_value - permutation_p(x, y)).abs()).collect();
    let bm_worst = gaps.iter().copied().fold(0.0, f64::max);
    let bm_over = gaps.iter().filter(|g| **g > 0.02).count();

    let mut fit_err = 0.0f64;
    for k in 0..20 {
        let n = 5 + k;
        let x = uniform(&mut rng, n, 3.0);
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v - 1.2 + rng.random_range(-1.0..1.0)).collect();
        let (r, slope, intercept) = closed_form(&x, &y);
        let fit = ols_regression(&x, &y).unwrap();
        fit_err = fit_err
            .max((pearson_r(&x, &y).unwrap() - r).abs())
            .max((fit.slope - slope).abs())
            .max((fit.intercept - intercept).abs());
    }

    let systems = ["AbS", "SA-Tacotron", "Tacotron", "Tacotron-ATTR"];
    let mut records = Vec::new();
    for l in 0..24 {
        let bias: i32 = rng.random_range(-1..=1);
        for s in 0..6 {
            let sys = (l + s) % systems.len();
            for q in Question::ALL {
                let score = (4 - sys as i32 / 2 + bias + rng.random_range(-1..=1)).clamp(1, 5);
                records.push(ScoreRecord::new(format!("L{l}"), format!("S{s}"), systems[sys], q, score as f64));
            }
        }
    }
    let raw = ScoreTable::raw(records).unwrap();
    let mut norm_err = 0.0f64;
    let moments = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
    };
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in standardize_listeners(&raw).unwrap().records() {
        groups.entry(r.listener.clone()).or_default().push(r.score);
    }
    let mut anchored: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in normalize_scores(&raw).unwrap().records().iter().filter(|r| r.system == REFERENCE_SYSTEM) {
        anchored.entry(r.story.clone()).or_default().push(r.score);
    }
    for v in groups.values().chain(anchored.values()) {
        let (m, s) = moments(v);
        norm_err = norm_err.max(m.abs()).max((s - 1.0).abs());
    }

    let ok = bm_over == 0 && fit_err <= 1e-12 && norm_err <= 1e-12;
    verdict(
        "statistics oracles",
        ok,
        &format!(
            "Brunner-Munzel vs exact permutation (12,870 splits): worst gap {bm_worst:.4}, {bm_over}/{} cases over 0.02 \
             (gaps {}); Pearson/OLS max error {fit_err:.1e}; normalisation max error {norm_err:.1e} over {} listeners and {} stories",
            cases.len(),
            gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(" "),
            groups.len(),
            anchored.len()
        ),
    );
}

#[test]
fn determinism_and_persistence() {
    let data = tiny_data(12, 5);
    let v: ModelVariant = "SA-Tacotron-GST-8-context".parse().unwrap();
    let cfg = tiny_config(3);
    let a = train(&data, v, &cfg).unwrap();
    let b = train(&data, v, &cfg).unwrap();
    let same_curves = a.history.train_losses() == b.history.train_losses()
        && a.history.validation_losses() == b.history.validation_losses();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rkg");
    save_checkpoint(&path, &a.model, Some(&a.state)).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let opts = SynthesisOptions { max_steps: Some(30), prenet_dropout: true, seed: 9, fixed_frames: None };
    let mut identical = true;
    for ex in data.test.iter().chain(&data.validation) {
        identical &= a.model.synthesize_example(ex, &opts).unwrap() == back.model.synthesize_example(ex, &opts).unwrap();
    }
    let mut resumed = Trainer::resume(&data, back.model, back.state, &tiny_config(4)).unwrap();
    resumed.run().unwrap();
    let straight = train(&data, v, &tiny_config(4)).unwrap();
    let resume_ok = resumed.history.train_losses()[0] == straight.history.train_losses()[3];

    verdict(
        "determinism and persistence",
        same_curves && identical && resume_ok,
        &format!(
            "identical loss curves over {} epochs: {same_curves}; synthesis after checkpoint round trip bit-identical: {identical}; \
             resumed epoch matches uninterrupted run: {resume_ok}",
            cfg.epochs
        ),
    );
}

fn run(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rakugo"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{}: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn check_artifacts(dir: &Path) -> Result<String, String> {
    let (mut wavs, mut csvs, mut svgs) = (0, 0, 0);
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            let bad = |why: String| format!("{}: {why}", p.display());
            match p.extension().and_then(|e| e.to_str()) {
                _ if p.is_dir() => stack.push(p.clone()),
                Some("wav") => {
                    let w = Waveform::read_wav(&p).map_err(|e| bad(e.to_string()))?;
                    if w.is_empty() {
                        return Err(bad("no samples".into()));
                    }
                    wavs += 1;
                }
                Some("csv") => {
                    let text = std::fs::read_to_string(&p).map_err(|e| bad(e.to_string()))?;
                    let mut lines = text.lines();
                    let width = lines.next().ok_or_else(|| bad("empty".into()))?.split(',').count();
                    if let Some(l) = lines.find(|l| l.split(',').count() != width) {
                        return Err(bad(format!("ragged row `{l}`")));
                    }
                    csvs += 1;
                }
                Some("svg") => {
                    let text = std::fs::read_to_string(&p).map_err(|e| bad(e.to_string()))?;
                    let doc = roxmltree::Document::parse(&text).map_err(|e| bad(e.to_string()))?;
                    if doc.root_element().tag_name().name() != "svg" {
                        return Err(bad("root is not <svg>".into()));
                    }
                    svgs += 1;
                }
                _ => {}
            }
        }
    }
    if wavs == 0 || csvs == 0 || svgs == 0 {
        return Err(format!("missing artifacts: {wavs} WAV, {csvs} CSV, {svgs} SVG"));
    }
    Ok(format!("{wavs} WAV, {csvs} CSV, {svgs} SVG files valid"))
}

#[test]
fn end_to_end_smoke() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let chain = || -> Result<String, String> {
        run(d, &["synth-corpus", "--out", "corpus", "--utterances", "12"])?;
        std::fs::write(d.join("desk.toml"), TrainConfig::desk().to_toml()).map_err(|e| e.to_string())?;
        run(d, &["train", "--variant", "SA-Tacotron-GST-8-context", "--config", "desk.toml", "--corpus", "corpus", "--out", "run"])?;
        let manifest = std::fs::read_to_string(d.join("corpus/manifest.txt")).map_err(|e| e.to_string())?;
        let story: Vec<&str> = manifest.lines().take(3).collect();
        std::fs::write(d.join("story.txt"), story.join("\n")).map_err(|e| e.to_string())?;
        std::fs::write(d.join("pauses.txt"), "0.6\n0.9\n").map_err(|e| e.to_string())?;
        run(d, &["synthesize", "--checkpoint", "run/checkpoint.rkg", "--input", "story.txt", "--out", "syn"])?;
        run(d, &["story", "--checkpoint", "run/checkpoint.rkg", "--sentences", "story.txt", "--pauses", "pauses.txt", "--out", "story.wav"])?;
        run(d, &[
            "eval-stats", "--simulate", "--systems", "AbS,SA-Tacotron-GST-8-context,SA-Tacotron,Tacotron",
            "--acoustic", "AbS=corpus", "--acoustic", "SA-Tacotron-GST-8-context=syn", "--out", "stats",
        ])?;
        run(d, &["plots", "--scores", "stats/scores_normalized.csv", "--acoustic-cov", "stats/acoustic_cov.csv", "--out", "plots"])?;
        check_artifacts(d)
    };
    let result = chain();
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(summary) => verdict("end-to-end smoke", secs < 2700.0, &format!("six commands, desk config; {summary}; {secs:.0} s")),
        Err(e) => verdict("end-to-end smoke", false, &e),
    }
}
