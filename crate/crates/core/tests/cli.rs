use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn harmonic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmonic")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = harmonic(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    harmonic(args).status.code().unwrap()
}

fn fixture() -> String {
    format!("{}/fixtures/reference_cases.csv", env!("CARGO_MANIFEST_DIR"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir, days: &str, seed: &str) -> PathBuf {
    let raw = dir.path().join(format!("raw_{days}_{seed}.csv"));
    ok(&["synth", "--days", days, "--seed", seed, "--out", s(&raw)]);
    raw
}

#[test]
fn synth_one_day_has_2880_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "1", "5");
    let first = fs::read(&raw).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 2881);
    assert!(text.starts_with("timestamp,"));
    ok(&["synth", "--days", "1", "--seed", "5", "--out", s(&raw)]);
    assert_eq!(fs::read(&raw).unwrap(), first);
    assert!(raw.with_extension("config.txt").exists());

    ok(&["synth", "--days", "1", "--seed", "6", "--out", s(&raw)]);
    assert_ne!(fs::read(&raw).unwrap(), first);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["synth", "--days", "0"]), 2);
    assert_eq!(code(&["train", "--model", "transformer"]), 2);
    assert_eq!(code(&["train", "--line", "4"]), 2);
    assert_eq!(code(&["simulate", "--set", "sim.cycles=0", "--features", "x.csv"]), 2);
    assert_eq!(code(&["synth", "--set", "no.such.key=1"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn analyze_writes_acf_and_daily_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "7", "11");
    let out = dir.path().join("an");
    let stdout = ok(&["analyze", "--in", s(&raw), "--out", s(&out)]);
    assert!(stdout.contains("thd_i_L1: morning"));

    let acf = fs::read_to_string(out.join("acf.csv")).unwrap();
    let mut rows = acf.lines().skip(1);
    assert_eq!(rows.next(), Some("0,1.000000"));
    assert_eq!(acf.lines().count(), 202);

    let profile = fs::read_to_string(out.join("profile_thd_i_L1.csv")).unwrap();
    let mean = |band: &str| -> f64 {
        let row = profile.lines().find(|l| l.starts_with(band)).unwrap();
        row.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!(mean("morning") > mean("afternoon"));
    assert!(mean("evening") > mean("afternoon"));
    for f in ["index.csv", "effective_config.txt", "scatter_current_vs_h3_L2.svg", "acf.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn analyze_rejects_empty_and_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "1", "1");
    let header = fs::read_to_string(&raw).unwrap().lines().next().unwrap().to_string();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{header}\n")).unwrap();
    let out = dir.path().join("an");
    assert_eq!(code(&["analyze", "--in", s(&empty), "--out", s(&out)]), 1);
    assert_eq!(code(&["analyze", "--in", "/nonexistent/raw.csv", "--out", s(&out)]), 1);
}

#[test]
fn train_reports_parameter_counts() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "1", "2");
    let out = dir.path().join("m");
    for (model, count) in [("lstm-only", "974,849"), ("seq2seq", "366,497")] {
        let stdout = ok(&[
            "train", "--model", model, "--in", s(&raw), "--out", s(&out),
            "--set", "train.epochs=1", "--set", "data.stride=200",
        ]);
        assert!(stdout.contains(&format!("trainable parameters: {count}")), "{stdout}");
    }
    assert!(out.join("lstm-only_L1_h3.ckpt").exists());
    let log = fs::read_to_string(out.join("seq2seq_L1_h3_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn evaluate_then_simulate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "2", "3");
    let m = dir.path().join("m");
    ok(&[
        "train", "--model", "gru-dense", "--order", "5", "--in", s(&raw), "--out", s(&m),
        "--set", "train.epochs=1", "--set", "data.stride=100",
    ]);
    ok(&[
        "train", "--model", "ensemble", "--line", "3", "--order", "3", "--in", s(&raw), "--out", s(&m),
        "--set", "ensemble.booster_estimators=20",
    ]);
    let ev = dir.path().join("ev");
    let stdout = ok(&[
        "evaluate",
        "--checkpoint", s(&m.join("gru-dense_L1_h5.ckpt")),
        "--checkpoint", s(&m.join("ensemble_L3_h3.ens")),
        "--in", s(&raw), "--out", s(&ev),
    ]);
    assert!(stdout.contains("gru-dense_L1_h5: mean"), "{stdout}");
    let features = fs::read_to_string(ev.join("features.csv")).unwrap();
    let header = features.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 21);
    assert!(ev.join("errors_gru-dense_L1_h5.csv").exists());

    let sim = dir.path().join("sim");
    let stdout = ok(&["simulate", "--features", s(&ev.join("features.csv")), "--line", "1", "--out", s(&sim)]);
    assert!(stdout.contains("cases improved"));
    let results = fs::read_to_string(sim.join("filter_results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.split(',').nth(1) == Some("1")));
}

#[test]
fn evaluate_rejects_bad_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let raw = synth(&dir, "1", "4");
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let out = dir.path().join("ev");
    assert_eq!(code(&["evaluate", "--checkpoint", s(&bad), "--in", s(&raw), "--out", s(&out)]), 1);
    let missing = dir.path().join("missing.ckpt");
    assert_eq!(code(&["evaluate", "--checkpoint", s(&missing), "--in", s(&raw), "--out", s(&out)]), 1);
    assert_eq!(code(&["evaluate", "--in", s(&raw), "--out", s(&out)]), 2);
}

#[test]
fn simulate_table_cases_all_improve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let stdout = ok(&["simulate", "--features", &fixture(), "--line", "1", "--out", s(&out)]);
    assert!(stdout.contains("10/10 cases improved"), "{stdout}");
    let csv = fs::read_to_string(out.join("filter_results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,"));
    assert!(out.join("case1_L1.svg").exists());
}

#[test]
fn simulate_flags_lines_without_fundamental() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let stdout = ok(&["simulate", "--features", &fixture(), "--out", s(&out)]);
    assert!(stdout.contains("skipped (no fundamental)"));
    let csv = fs::read_to_string(out.join("filter_results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert_eq!(csv.lines().filter(|l| l.ends_with("unrunnable")).count(), 20);
}

#[test]
fn simulate_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["simulate", "--features", "/nonexistent.csv", "--out", s(dir.path())]), 1);
}

#[test]
fn config_file_and_overrides_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# small run\nseed = 9\ndata.days = 1\n").unwrap();
    let raw = dir.path().join("raw.csv");
    let stdout = ok(&["synth", "--config", s(&cfg), "--out", s(&raw)]);
    assert!(stdout.contains("seed 9"), "{stdout}");
    let stdout = ok(&["synth", "--config", s(&cfg), "--set", "seed=10", "--out", s(&raw)]);
    assert!(stdout.contains("seed 10"));
    let stdout = ok(&["synth", "--config", s(&cfg), "--set", "seed=10", "--seed", "12", "--out", s(&raw)]);
    assert!(stdout.contains("seed 12"));
    let dump = fs::read_to_string(raw.with_extension("config.txt")).unwrap();
    assert!(dump.lines().any(|l| l == "seed = 12"), "{dump}");
}
