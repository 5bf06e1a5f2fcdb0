use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rakugo_dsp::{GriffinLim, DEFAULT_ITERATIONS, TARGET_DBOV};
use rakugo_frontend::{generate_synthetic_corpus, CorpusManifest};
use rakugo_model::{ModelVariant, StyleWeights, SynthesisOptions};
use rakugo_pipeline::{
    fingerprint, load_checkpoint, load_checkpoint_expecting, measure_directory, read_pauses, save_checkpoint, synthesize_story, Dataset, SimulatedListening,
    StoryOptions, Style, TrainConfig, TrainedModel, Trainer,
};
use rakugo_stats::{
    acoustic_report, emit_plots, load_cov_csv, normalize_scores, pairwise_tests, report_from_cov, write_cov_csv,
    write_results_csv, PlotInputs, Question, Scale, ScoreTable, DEFAULT_COMPARISONS, REFERENCE_SYSTEM,
};

const CHECKPOINT_FILE: &str = "checkpoint.rkg";

#[derive(Parser)]
#[command(name = "rakugo", version, about = "Train and evaluate expressive Tacotron-style storytelling voices")]
struct Cli {
    /// Run per-utterance work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic synthetic corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Train one model variant on a corpus directory.
    Train(TrainArgs),
    /// Synthesise every utterance of a manifest to WAV.
    Synthesize(SynthesizeArgs),
    /// Synthesise a multi-sentence story with given pauses.
    Story(StoryArgs),
    /// Normalise listening-test scores and run the pairwise tests.
    EvalStats(EvalStatsArgs),
    /// Draw score and acoustic plots from `eval-stats` output.
    Plots(PlotsArgs),
}

#[derive(Args)]
struct SynthCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    utterances: usize,
    #[arg(long, default_value_t = 6)]
    min_phonemes: usize,
    #[arg(long, default_value_t = 14)]
    max_phonemes: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Variant name, e.g. `Tacotron`, `SA-Tacotron-GST-8-context`.
    #[arg(long)]
    variant: ModelVariant,
    /// TOML training configuration; desk defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus directory with `manifest.txt`, `partitions.txt` and audio.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the configured epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also write a checkpoint every N epochs.
    #[arg(long, default_value_t = 0)]
    save_every: usize,
}

#[derive(Args)]
struct VoiceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Token weights for GST variants: one line per head, or one line shared by all heads.
    #[arg(long)]
    gst_weights: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Turn off pre-net dropout while decoding.
    #[arg(long)]
    no_prenet_dropout: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl VoiceArgs {
    fn options(&self) -> SynthesisOptions {
        SynthesisOptions { max_steps: self.max_steps, prenet_dropout: !self.no_prenet_dropout, seed: self.seed, fixed_frames: None }
    }

    fn weights(&self, model: &TrainedModel) -> Result<Option<StyleWeights>> {
        let Some(path) = &self.gst_weights else {
            return Ok(None);
        };
        if !model.variant().conditioning.uses_gst() {
            bail!("--gst-weights given but {} has no style tokens", model.variant());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut w: StyleWeights = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let heads = model.dims().gst_heads;
        if w.heads() == 1 && heads > 1 {
            w = StyleWeights::shared(w.rows()[0].clone(), heads)?;
        }
        Ok(Some(w))
    }
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    voice: VoiceArgs,
    /// Manifest file (`id|symbols|labels` per line).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StoryArgs {
    #[command(flatten)]
    voice: VoiceArgs,
    /// Manifest of the story's sentences, in reading order.
    #[arg(long)]
    sentences: PathBuf,
    /// One pause in seconds per line, one per sentence boundary.
    #[arg(long)]
    pauses: PathBuf,
    /// Output WAV file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TARGET_DBOV)]
    level: f64,
}

#[derive(Args)]
struct EvalStatsArgs {
    /// Raw 1-5 scores, CSV with header `listener,story,system,question,score`.
    #[arg(long, conflicts_with = "simulate", required_unless_present = "simulate")]
    scores: Option<PathBuf>,
    /// Generate answers from a simulated listening test instead.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 40)]
    listeners: usize,
    #[arg(long, default_value_t = 8)]
    stories: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Systems to compare, in plot order. Defaults to every system in the scores.
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    questions: Vec<Question>,
    /// Number of comparisons for the Bonferroni correction.
    #[arg(long, default_value_t = DEFAULT_COMPARISONS)]
    m: usize,
    /// `NAME=DIR`: stimuli of system NAME, a directory with `manifest.txt` and audio.
    #[arg(long = "acoustic", value_parser = parse_acoustic)]
    acoustic: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotsArgs {
    /// Normalised scores written by `eval-stats`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// `acoustic_cov.csv` written by `eval-stats`.
    #[arg(long)]
    acoustic_cov: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    questions: Vec<Question>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_acoustic(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => Ok((name.to_string(), PathBuf::from(dir))),
        _ => Err(format!("expected NAME=DIR, got `{s}`")),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let strategy = if cli.sequential { rakugo_autodiff::Parallelism::Sequential } else { Default::default() };
    match cli.command {
        Command::SynthCorpus(a) => synth_corpus(a),
        Command::Train(a) => train(a, cli.sequential),
        Command::Synthesize(a) => synthesize(a, strategy),
        Command::Story(a) => story(a, strategy),
        Command::EvalStats(a) => eval_stats(a, strategy),
        Command::Plots(a) => plots(a),
    }
}

fn synth_corpus(a: SynthCorpusArgs) -> Result<()> {
    if a.min_phonemes > a.max_phonemes {
        bail!("--min-phonemes {} exceeds --max-phonemes {}", a.min_phonemes, a.max_phonemes);
    }
    let corpus = generate_synthetic_corpus(a.seed, a.utterances, a.min_phonemes..=a.max_phonemes)?;
    corpus.write(&a.out).with_context(|| format!("writing corpus to {}", a.out.display()))?;
    log::info!("wrote {} utterances to {}", corpus.manifest.utterances.len(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs, sequential: bool) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::desk(),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if sequential {
        cfg.parallel = false;
    }
    cfg.validate()?;
    let data = Dataset::load(&a.corpus, cfg.parallelism()).with_context(|| format!("loading corpus {}", a.corpus.display()))?;
    log::info!(
        "{} training and {} validation utterances, {} mel channels",
        data.train.len(),
        data.validation.len(),
        data.n_mels()
    );
    let mut trainer = match &a.resume {
        None => Trainer::new(&data, a.variant, &cfg)?,
        Some(path) => {
            let mut dims = cfg.dims()?;
            dims.n_mels = data.n_mels();
            let expected = fingerprint(a.variant, &dims, data.mel_config.sample_rate);
            let ckpt = load_checkpoint_expecting(path, &expected)
                .with_context(|| format!("resuming {} at scale {}", a.variant, cfg.scale))?;
            Trainer::resume(&data, ckpt.model, ckpt.state, &cfg)?
        }
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    std::fs::write(a.out.join("config.toml"), cfg.to_toml())?;
    let ckpt_path = a.out.join(CHECKPOINT_FILE);
    while trainer.state.epochs_done < cfg.epochs {
        trainer.run_epoch()?;
        if a.save_every > 0 && trainer.state.epochs_done % a.save_every == 0 {
            save_checkpoint(&ckpt_path, &trainer.model, Some(&trainer.state))?;
            trainer.history.write_csv(&a.out.join("loss_history.csv"))?;
        }
    }
    let outcome = trainer.finish();
    save_checkpoint(&ckpt_path, &outcome.model, Some(&outcome.state))?;
    outcome.history.write_csv(&a.out.join("loss_history.csv"))?;
    if let Some(best) = outcome.history.best_validation() {
        log::info!("best validation loss {:.4} at epoch {}", best.validation.total, best.epoch);
    }
    log::info!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Vec<rakugo_frontend::Utterance>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let utterances = CorpusManifest::parse_manifest(&text, path)?;
    if utterances.is_empty() {
        bail!("{} lists no utterances", path.display());
    }
    Ok(utterances)
}

fn synthesize(a: SynthesizeArgs, strategy: rakugo_autodiff::Parallelism) -> Result<()> {
    let model = load_checkpoint(&a.voice.checkpoint)?.model;
    let weights = a.voice.weights(&model)?;
    let style = weights.as_ref().map_or(Style::Auto, Style::Weights);
    let mut utterances = read_manifest(&a.input)?;
    let vocoder = GriffinLim::new(model.mel_config()?)?;
    let wav_dir = a.out.join("wav");
    std::fs::create_dir_all(&wav_dir).with_context(|| format!("creating {}", wav_dir.display()))?;
    let opts = a.voice.options();
    let results = rakugo_autodiff::map_indexed(&utterances, strategy, |i, u| -> Result<_> {
        let o = SynthesisOptions { seed: opts.seed.wrapping_add(i as u64), ..opts };
        let (out, mel) = model.synthesize(&u.phonemes, &u.labels, style, None, &o)?;
        Ok((vocoder.reconstruct(&mel, a.voice.iterations)?.waveform, out.truncated))
    });
    for (u, r) in utterances.iter_mut().zip(results) {
        let (wav, truncated) = r?;
        if truncated {
            log::warn!("{} reached the step limit", u.id);
        }
        let rel = PathBuf::from("wav").join(format!("{}.wav", u.id));
        wav.write_wav(a.out.join(&rel))?;
        u.audio = Some(rel);
    }
    let manifest = CorpusManifest { utterances, ..Default::default() };
    std::fs::write(a.out.join(rakugo_pipeline::acoustics::MANIFEST_FILE), manifest.manifest_text())?;
    log::info!("wrote {} files to {}", manifest.utterances.len(), wav_dir.display());
    Ok(())
}

fn story(a: StoryArgs, strategy: rakugo_autodiff::Parallelism) -> Result<()> {
    let model = load_checkpoint(&a.voice.checkpoint)?.model;
    let weights = a.voice.weights(&model)?;
    let style = weights.as_ref().map_or(Style::Auto, Style::Weights);
    let sentences = read_manifest(&a.sentences)?;
    let pauses = read_pauses(&a.pauses)?;
    let opts = StoryOptions {
        synthesis: a.voice.options(),
        griffin_lim_iterations: a.voice.iterations,
        target_dbov: a.level,
        parallelism: strategy,
    };
    let audio = synthesize_story(&sentences, &pauses, &model, style, &opts)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    audio.waveform.write_wav(&a.out)?;
    log::info!("{} sentences, {:.2} s, written to {}", sentences.len(), audio.waveform.duration(), a.out.display());
    Ok(())
}

fn eval_stats(a: EvalStatsArgs, strategy: rakugo_autodiff::Parallelism) -> Result<()> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let raw = match &a.scores {
        Some(p) => ScoreTable::load(p, Scale::Raw).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let systems = if a.systems.is_empty() {
                ["AbS", "SA-Tacotron-GST-8-context", "SA-Tacotron", "Tacotron"].map(String::from).to_vec()
            } else {
                a.systems.clone()
            };
            let table = SimulatedListening::ranked(&systems, a.listeners, a.stories, a.seed).generate()?;
            table.save(a.out.join("scores_raw.csv"))?;
            table
        }
    };
    let normalized = normalize_scores(&raw)?;
    normalized.save(a.out.join("scores_normalized.csv"))?;

    let systems = if a.systems.is_empty() { raw.systems() } else { a.systems.clone() };
    let questions = if a.questions.is_empty() { Question::ALL.to_vec() } else { a.questions.clone() };
    let results = pairwise_tests(&normalized, &systems, &questions, a.m)?;
    let tests_path = a.out.join("tests.csv");
    write_results_csv(&results, std::fs::File::create(&tests_path)?)?;
    for r in results.iter().filter(|r| r.significant[0]) {
        log::info!("{} {} vs {}: p = {:.2e} {}", r.question, r.system_x, r.system_y, r.p_corrected, "*".repeat(r.stars()));
    }
    log::info!("{} comparisons written to {}", results.len(), tests_path.display());

    if !a.acoustic.is_empty() {
        let measured = a
            .acoustic
            .iter()
            .map(|(name, dir)| measure_directory(name, dir, strategy).with_context(|| format!("measuring {name} in {}", dir.display())))
            .collect::<Result<Vec<_>>>()?;
        let report = acoustic_report(&measured, Some(&normalized), REFERENCE_SYSTEM)?;
        write_cov_csv(&report.entries(), std::fs::File::create(a.out.join("acoustic_cov.csv"))?)?;
        for assoc in report.associations.iter().filter(|x| x.correlation.is_some()) {
            log::info!("{} vs {}: r = {:.3}", assoc.measure.name(), assoc.question, assoc.correlation.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}

fn plots(a: PlotsArgs) -> Result<()> {
    if a.scores.is_none() && a.acoustic_cov.is_none() {
        bail!("nothing to plot: give --scores and/or --acoustic-cov");
    }
    let scores = match &a.scores {
        Some(p) => Some(ScoreTable::load(p, Scale::Normalized).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let report = match &a.acoustic_cov {
        Some(p) => {
            let entries = load_cov_csv(p).with_context(|| format!("reading {}", p.display()))?;
            Some(report_from_cov(&entries, scores.as_ref(), REFERENCE_SYSTEM)?)
        }
        None => None,
    };
    let inputs = PlotInputs {
        scores: scores.as_ref(),
        systems: (!a.systems.is_empty()).then(|| a.systems.clone()),
        questions: a.questions.clone(),
        acoustic: report.as_ref(),
    };
    let files = emit_plots(&a.out, &inputs)?;
    log::info!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}
