use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.conf")
}

fn neurovox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurovox")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stages_run_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();
    for stage in ["synth-data", "preprocess", "features", "train", "predict", "vocode", "evaluate"] {
        let o = neurovox(&[stage, "--config", cfg, "--out", out, "--seed", "4"]);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    let table = std::fs::read_to_string(dir.path().join("results/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn run_subcommand_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = neurovox(&["run", "--config", smoke_config().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("transformer+ihpr"));
    assert!(stdout.contains("linreg+griffin_lim"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "stft.hop = 200\n").unwrap();
    let o = neurovox(&["synth-data", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frame"), "{}", stderr(&o));
    assert!(!dir.path().join("data").exists());

    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let o = neurovox(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"));

    assert_eq!(neurovox(&["run"]).status.code(), Some(2));
    assert_eq!(neurovox(&["dance", "--config", "x"]).status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = neurovox(&["predict", "--config", smoke_config().to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
    assert!(stderr(&o).contains("folds.json"));

    let o = neurovox(&["run", "--config", dir.path().join("absent.conf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.conf"));
}
