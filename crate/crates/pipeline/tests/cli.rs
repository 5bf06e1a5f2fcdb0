use std::path::Path;
use std::process::Command;

fn rakugo(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_rakugo"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "rakugo {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn command_chain_produces_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("train.toml"), "scale = 0.0625\nepochs = 1\nbatch_size = 4\n").unwrap();
    rakugo(d, &["synth-corpus", "--out", "corpus", "--utterances", "12", "--max-phonemes", "9"]);
    assert!(d.join("corpus/manifest.txt").exists() && d.join("corpus/partitions.txt").exists());

    rakugo(d, &["train", "--variant", "SA-Tacotron-GST-8", "--config", "train.toml", "--corpus", "corpus", "--out", "run"]);
    let history = std::fs::read_to_string(d.join("run/loss_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    rakugo(d, &[
        "train", "--variant", "SA-Tacotron-GST-8", "--config", "train.toml", "--corpus", "corpus", "--out", "run",
        "--resume", "run/checkpoint.rkg", "--epochs", "2",
    ]);
    let history = std::fs::read_to_string(d.join("run/loss_history.csv")).unwrap();
    assert!(history.lines().nth(1).unwrap().starts_with("2,"), "{history}");

    let manifest = std::fs::read_to_string(d.join("corpus/manifest.txt")).unwrap();
    let lines: Vec<&str> = manifest.lines().take(2).collect();
    std::fs::write(d.join("sentences.txt"), lines.join("\n")).unwrap();
    std::fs::write(d.join("pauses.txt"), "0.4\n").unwrap();
    std::fs::write(d.join("weights.txt"), "0.5 0.5 0 0 0 0 0 0 0 0\n").unwrap();
    let voice = ["--checkpoint", "run/checkpoint.rkg", "--max-steps", "20", "--iterations", "3", "--gst-weights", "weights.txt"];

    let mut args = vec!["synthesize", "--input", "sentences.txt", "--out", "syn"];
    args.extend(voice);
    rakugo(d, &args);
    let syn = std::fs::read_to_string(d.join("syn/manifest.txt")).unwrap();
    assert_eq!(syn.lines().count(), 2);
    for line in syn.lines() {
        let audio = line.rsplit('|').next().unwrap();
        assert!(d.join("syn").join(audio).exists(), "{audio}");
    }

    let mut args = vec!["story", "--sentences", "sentences.txt", "--pauses", "pauses.txt", "--out", "story.wav"];
    args.extend(voice);
    rakugo(d, &args);
    assert!(d.join("story.wav").exists());

    rakugo(d, &[
        "eval-stats", "--simulate", "--listeners", "12", "--stories", "4", "--systems", "AbS,SA-Tacotron-GST-8,Tacotron",
        "--acoustic", "AbS=corpus", "--acoustic", "SA-Tacotron-GST-8=syn", "--out", "stats",
    ]);
    for f in ["scores_raw.csv", "scores_normalized.csv", "tests.csv", "acoustic_cov.csv"] {
        assert!(d.join("stats").join(f).exists(), "{f}");
    }
    rakugo(d, &["plots", "--scores", "stats/scores_normalized.csv", "--acoustic-cov", "stats/acoustic_cov.csv", "--out", "plots"]);
    for f in ["scores_Q1.svg", "questions_Q1_Q2.svg", "f0_cov_Q3.svg", "rate_cov_Q4.csv"] {
        assert!(d.join("plots").join(f).exists(), "{f}");
    }
}

#[test]
fn bad_input_fails_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rakugo"))
        .current_dir(tmp.path())
        .args(["train", "--variant", "Tacotron-XL", "--corpus", "nowhere", "--out", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Tacotron-XL"));

    let out = Command::new(env!("CARGO_BIN_EXE_rakugo"))
        .current_dir(tmp.path())
        .args(["train", "--variant", "Tacotron", "--corpus", "nowhere", "--out", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}
