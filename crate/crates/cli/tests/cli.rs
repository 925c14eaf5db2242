use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtpose_core::synthetic::write_synthetic_dataset;

fn mtpose(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mtpose"));
    cmd.args(args).env_remove("MTPOSE_OUT");
    cmd
}

fn output(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn dataset(dir: &Path, n: usize) -> PathBuf {
    write_synthetic_dataset(&dir.join("data"), n, 64).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_one_png_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 3);
    let suite = dir.path().join("suite");
    let out = output(&mut mtpose(&["generate", "--manifest", s(&manifest), "--out", s(&suite), "--preprocess", "none"]));
    assert!(out.status.success());
    let pngs = std::fs::read_dir(&suite)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 102);
    assert!(suite.join("suite.json").is_file());
}

#[test]
fn run_then_verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 2);
    let good = dir.path().join("good");
    let out = output(&mut mtpose(&["run", "--manifest", s(&manifest), "--out", s(&good), "--preprocess", "none"]));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MR1"));

    let bad = dir.path().join("bad");
    let out = output(&mut mtpose(&[
        "run", "--manifest", s(&manifest), "--out", s(&bad), "--preprocess", "none",
        "--adapter", "degrader", "--fail", "TC13=1", "--seed", "5",
    ]));
    assert_eq!(out.status.code(), Some(3));

    let reverify = dir.path().join("reverify");
    for (metrics, code) in [(good.join("metrics.csv"), 0), (bad.join("metrics.csv"), 3)] {
        let out = output(&mut mtpose(&["verify", "--metrics", s(&metrics), "--out", s(&reverify)]));
        assert_eq!(out.status.code(), Some(code));
        assert_eq!(
            std::fs::read(reverify.join("verdicts.json")).unwrap(),
            std::fs::read(metrics.with_file_name("verdicts.json")).unwrap()
        );
    }

    let rewritten = dir.path().join("rewritten");
    let out = output(&mut mtpose(&["report", "--run", s(&bad.join("run.json")), "--out", s(&rewritten)]));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(
        std::fs::read(rewritten.join("metrics.csv")).unwrap(),
        std::fs::read(bad.join("metrics.csv")).unwrap()
    );
}

#[test]
fn score_recorded_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 1);
    let run_dir = dir.path().join("run");
    let args = ["run", "--manifest", s(&manifest), "--out", s(&run_dir), "--preprocess", "none", "--mrs", "MR2"];
    assert!(output(&mut mtpose(&args)).status.success());

    let scored = dir.path().join("scored");
    let out = output(&mut mtpose(&[
        "score", "--suite", s(&run_dir.join("suite")), "--predictions", s(&run_dir.join("predictions.jsonl")),
        "--model", "oracle", "--out", s(&scored),
    ]));
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(scored.join("metrics.csv")).unwrap(),
        std::fs::read(run_dir.join("metrics.csv")).unwrap()
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 1);
    let target = dir.path().join("from-env");
    let out = output(
        mtpose(&["run", "--manifest", s(&manifest), "--preprocess", "none", "--mrs", "MR4"]).env("MTPOSE_OUT", &target),
    );
    assert!(out.status.success());
    assert!(target.join("verdicts.json").is_file());
}

#[test]
fn bad_input_fails() {
    let out = output(&mut mtpose(&["run", "--no-such-flag"]));
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(3));

    let out = output(&mut mtpose(&["verify", "--metrics", "/nonexistent/metrics.csv", "--out", "/tmp"]));
    assert_eq!(out.status.code(), Some(1));

    let out = output(&mut mtpose(&["run", "--manifest", "x.json", "--adapter", "degrader", "--fail", "TC99=1"]));
    assert!(!out.status.success());
}

#[test]
fn help_lists_defaults() {
    let out = output(&mut mtpose(&["--help"]));
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["0.5", "10", "0.05", "0.8", "20", "244", "generate", "run", "score", "verify", "report"] {
        assert!(text.contains(needle), "help lacks {needle}:\n{text}");
    }
}
