//! End-to-end checks of the command-line binary: artifact layout,
//! reproducibility of generated corpora, and both error exit paths.

use std::path::Path;
use std::process::{Command, Output};

fn coqan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coqan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = coqan(args);
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn gen(dir: &Path, kind: &str, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("{}-{}", kind, seed));
    run_ok(&[
        "gen-synthetic",
        "--spec",
        kind,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]);
    out.join(format!("{}.jsonl", kind))
}

#[test]
fn gen_synthetic_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, 7u64), (&b, 7), (&c, 8)] {
        run_ok(&[
            "gen-synthetic",
            "--spec",
            "text-signal",
            "--n",
            "200",
            "--seed",
            &seed.to_string(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let read = |d: &Path| std::fs::read(d.join("text-signal.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b), "same seed must produce identical bytes");
    assert_ne!(read(&a), read(&c), "different seeds must differ");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("text-signal.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["kind"], "text-signal");
    assert_eq!(meta["n"], 200);
    assert_eq!(meta["seed"], 7);
}

#[test]
fn train_then_eval_writes_parseable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let train_corpus = gen(dir.path(), "layout-signal", 120, 3);
    let val_corpus = gen(dir.path(), "layout-signal", 60, 4);

    let model_out = dir.path().join("run");
    run_ok(&[
        "train",
        "--train",
        train_corpus.to_str().unwrap(),
        "--val",
        val_corpus.to_str().unwrap(),
        "--subnets",
        "LO",
        "--max-epochs",
        "2",
        "--seed",
        "5",
        "--out",
        model_out.to_str().unwrap(),
    ]);
    for artifact in ["model/bundle.json", "model/params.ckpt", "epochs.csv", "manifest.json"] {
        assert!(
            model_out.join(artifact).is_file(),
            "missing artifact {}",
            artifact
        );
    }

    let eval_out = dir.path().join("scores");
    run_ok(&[
        "eval",
        "--model",
        model_out.join("model").to_str().unwrap(),
        "--data",
        val_corpus.to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("metrics.json")).unwrap())
            .unwrap();
    let accuracy = metrics["metrics"]["accuracy"]
        .as_f64()
        .expect("accuracy is a number");
    assert!((0.0..=1.0).contains(&accuracy), "accuracy {}", accuracy);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "eval");
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = coqan(&["train", "--bogus-flag", "x"]);
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.to_lowercase().contains("usage"),
        "stderr should show usage, got: {}",
        stderr
    );
}

#[test]
fn missing_input_exits_with_single_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = coqan(&[
        "eval",
        "--model",
        dir.path().join("no-such-model").to_str().unwrap(),
        "--data",
        dir.path().join("no-such-data.jsonl").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error line, got: {:?}", lines);
    assert!(lines[0].starts_with("error: "), "got: {}", lines[0]);
}

#[test]
fn ablate_reports_the_selected_subnets() {
    let dir = tempfile::tempdir().unwrap();
    let train_corpus = gen(dir.path(), "mixed", 80, 11);
    let val_corpus = gen(dir.path(), "mixed", 40, 12);
    let test_corpus = gen(dir.path(), "mixed", 40, 13);

    let cfg_path = dir.path().join("fast.json");
    std::fs::write(&cfg_path, "{\"max_epochs\": 2}").unwrap();

    let out = dir.path().join("ablation");
    run_ok(&[
        "ablate",
        "--subnets",
        "LO",
        "--train",
        train_corpus.to_str().unwrap(),
        "--val",
        val_corpus.to_str().unwrap(),
        "--test",
        test_corpus.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(report["subnets"], "LO");
    assert!(report["metrics"]["accuracy"].as_f64().is_some());
}
