//! End-to-end checks of the `olr` binary: subcommand flow, flag and
//! environment overrides, and the exit-code contract.

use std::path::Path;
use std::process::Command;

fn olr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_olr"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        r#"
seed = 7

[synth]
n_languages = 2
train_speakers = 2
test_speakers = 1
utts_per_speaker = 3
utt_seconds = 0.5

[ubm]
n_components = 8
n_iterations = 3

[tv]
dim = 4
n_iterations = 3

[backend]
lda_dim = 1
"#,
    )
    .unwrap();
    path
}

#[test]
fn full_subcommand_flow_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let run = |args: &[&str]| {
        let output = olr()
            .args(args)
            .arg("--config")
            .arg(&config)
            .current_dir(dir.path())
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        String::from_utf8_lossy(&output.stdout).into_owned()
    };

    let synth_out = run(&["synth"]);
    assert!(synth_out.contains("18 segments"), "{synth_out}");
    run(&["train"]);
    assert!(dir.path().join("work/artifacts.txt").is_file());
    let score_out = run(&["score"]);
    assert!(score_out.contains("scores.txt"), "{score_out}");
    let eval_out = run(&["evaluate"]);
    assert!(eval_out.contains("Cavg*100"), "{eval_out}");
    assert!(dir.path().join("work/report.kv").is_file());
    assert!(dir.path().join("work/det.txt").is_file());
}

#[test]
fn baseline_reports_all_systems() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let output = olr()
        .arg("baseline")
        .arg("--config")
        .arg(&config)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    for label in [
        "i-vector",
        "L-vector",
        "i-vector-SVM (Linear)",
        "i-vector-SVM (Poly)",
        "i-vector-SVM (RBF)",
        "L-vector-SVM (Linear)",
        "L-vector-SVM (Poly)",
        "L-vector-SVM (RBF)",
    ] {
        assert!(stdout.contains(label), "missing {label} in:\n{stdout}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[backend]\nscoring = \"psychic\"\n").unwrap();
    let output = olr()
        .arg("synth")
        .arg("--config")
        .arg(&bad)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    // Corpus exists but the score file is malformed.
    for args in [vec!["synth"], vec!["train"]] {
        assert!(olr()
            .args(&args)
            .arg("--config")
            .arg(&config)
            .current_dir(dir.path())
            .env("RUST_LOG", "warn")
            .status()
            .unwrap()
            .success());
    }
    let scores = dir.path().join("bad_scores.txt");
    std::fs::write(&scores, "zh-cn_e00_000 0.5 0.5 0.5\n").unwrap();
    let output = olr()
        .arg("evaluate")
        .arg("--scores")
        .arg(&scores)
        .arg("--config")
        .arg(&config)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn env_and_flag_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    // OLR_CORPUS_DIR moves the corpus; the flag then overrides the env.
    let env_corpus = dir.path().join("env_corpus");
    assert!(olr()
        .arg("synth")
        .arg("--config")
        .arg(&config)
        .env("OLR_CORPUS_DIR", &env_corpus)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .status()
        .unwrap()
        .success());
    assert!(env_corpus.join("manifest.txt").is_file());

    let flag_corpus = dir.path().join("flag_corpus");
    assert!(olr()
        .arg("synth")
        .arg("--config")
        .arg(&config)
        .arg("--corpus-dir")
        .arg(&flag_corpus)
        .env("OLR_CORPUS_DIR", &env_corpus)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .status()
        .unwrap()
        .success());
    assert!(flag_corpus.join("manifest.txt").is_file());

    // Seed override changes the audio.
    let a = std::fs::read(env_corpus.join("manifest.txt")).unwrap();
    let seeded = dir.path().join("seeded_corpus");
    assert!(olr()
        .args(["synth", "--seed", "99"])
        .arg("--config")
        .arg(&config)
        .arg("--corpus-dir")
        .arg(&seeded)
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .status()
        .unwrap()
        .success());
    let b = std::fs::read(seeded.join("manifest.txt")).unwrap();
    // Same structure, same manifest text; audio differs.
    assert_eq!(a, b);
    let rec = "zh-cn_t00_u000.wav";
    let wav_a = std::fs::read(env_corpus.join("wav").join(rec)).unwrap();
    let wav_b = std::fs::read(seeded.join("wav").join(rec)).unwrap();
    assert_ne!(wav_a, wav_b);
}
