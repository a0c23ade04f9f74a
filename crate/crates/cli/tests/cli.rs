use std::path::Path;
use std::process::{Command, Output};

use latent_ssa::data::save_dataset;
use latent_ssa::synthetic::templated_corpus;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-ssa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/three_sentences.json")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--n-max", "5", "--trials", "50", "--seed", "1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    assert!(stdout.lines().count() >= 6);
}

#[test]
fn eval_against_itself_is_perfect() {
    let f = fixture();
    let out = run(&["eval", "--gold", &f, "--pred", &f, "--buckets", "1,2,4"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("SF1") && l.contains("1.000")), "{stdout}");
    let json: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(json["metrics"]["sf1"]["f1"], 1.0);
}

#[test]
fn stats_prints_counts() {
    let out = run(&["stats", "--data", &fixture()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("3 sentences, 3 tuples"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--n-max", "0"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--data", &fixture(), "--out", s(dir.path()), "--set", "epochs=nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_one() {
    let out = run(&["stats", "--data", "/nonexistent/file.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_predict_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.json");
    let dev = dir.path().join("dev.json");
    save_dataset(&train, &templated_corpus(16, 1)).unwrap();
    save_dataset(&dev, &templated_corpus(6, 2)).unwrap();
    let model_dir = dir.path().join("model");

    let out = run(&[
        "train", "--data", s(&train), "--dev", s(&dev), "--out", s(&model_dir), "--set", "epochs=2", "--set", "batch_size=4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(model_dir.join("metrics.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let pred = dir.path().join("pred.json");
    let ckpt = model_dir.join("best.ckpt");
    let out = run(&["predict", "--model", s(&ckpt), "--data", s(&dev), "--out", s(&pred), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["eval", "--gold", s(&dev), "--pred", s(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let json: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    let sf1 = json["metrics"]["sf1"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&sf1));

    let gold_pred = dir.path().join("gold_pred.json");
    let out = run(&["predict", "--model", s(&ckpt), "--data", s(&dev), "--out", s(&gold_pred), "--gold-expressions"]);
    assert!(out.status.success());
}
