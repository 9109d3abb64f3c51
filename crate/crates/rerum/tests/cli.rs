use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rerum_core::metrics::MetricReport;
use tempfile::TempDir;

fn rerum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rerum"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const QUICK: &[&str] = &[
    "--data.synthetic.n",
    "3000",
    "--data.synthetic.d_numeric",
    "3",
    "--train.batch_size",
    "64",
    "--train.pair_sample_size",
    "8",
    "--train.max_epochs",
    "3",
    "--train.patience",
    "2",
    "--model.representation_layers",
    "[8,4]",
    "--model.head_layers",
    "[4]",
];

fn train_quick(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", out];
    args.extend_from_slice(QUICK);
    args.extend_from_slice(extra);
    rerum(dir, &args)
}

#[test]
fn synth_writes_dataset_and_truth() {
    let dir = TempDir::new().unwrap();
    let run = |out: &str| rerum(dir.path(), &["synth", "--out", out, "--data.synthetic.n", "500", "--seed", "4"]);
    assert!(run("a").status.success());
    assert!(run("b").status.success());
    let data = fs::read_to_string(dir.path().join("a/data.csv")).unwrap();
    assert_eq!(data.lines().count(), 501);
    assert_eq!(fs::read_to_string(dir.path().join("a/truth.csv")).unwrap().lines().count(), 501);
    for file in ["data.csv", "truth.csv", "schema.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(file)).unwrap(), fs::read(dir.path().join("b").join(file)).unwrap());
    }
}

#[test]
fn synth_with_identical_arms_has_zero_effects() {
    let dir = TempDir::new().unwrap();
    let arm = r#"{"a": [0.4, -0.2], "b": -0.5, "c": [0.3, 0.1], "d": 0.2}"#;
    let config = format!(
        r#"{{"data": {{"synthetic": {{"n": 300, "d_numeric": 2, "coefficients": {{"treated": {arm}, "control": {arm}}}}}}}}}"#
    );
    fs::write(dir.path().join("c.json"), config).unwrap();
    let out = rerum(dir.path(), &["synth", "--config", "c.json", "--out", "s"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let truth = rerum::io::read_truth_csv(&dir.path().join("s/truth.csv")).unwrap();
    assert_eq!(truth.len(), 300);
    assert!(truth.iter().all(|&c| c == 0.0));
}

#[test]
fn train_then_eval() {
    let dir = TempDir::new().unwrap();
    let out = train_quick(dir.path(), "run", &["--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("AUUC") && summary.contains("KRCC") && summary.contains("LIFT@30"), "{summary}");
    for file in ["checkpoint.json", "history.json", "validation_report.json", "config.json"] {
        assert!(dir.path().join("run").join(file).exists(), "{file}");
    }
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/config.json")).unwrap()).unwrap();
    assert_eq!(echoed["train"]["seed"], 3);
    assert_eq!(echoed["train"]["learning_rate"], 0.001);

    let mut args = vec!["eval", "--checkpoint", "run/checkpoint.json", "--out", "eval", "--seed", "3", "--eval.lift_h", "2"];
    args.extend_from_slice(&QUICK[..4]);
    let out = rerum(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("LIFT@2 "));
    let report: MetricReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report.lift_h, 2.0);
    assert_eq!(report.n, 900);
    assert!(report.auuc_norm.is_some() && report.auqc_norm.is_some() && report.mape.is_some());
    for curve in ["uplift_curve.csv", "qini_curve.csv"] {
        let text = fs::read_to_string(dir.path().join("eval").join(curve)).unwrap();
        assert_eq!(text.lines().count(), 101);
    }

    let mut args = vec!["curves", "--checkpoint", "run/checkpoint.json", "--out", "curves", "--eval.buckets", "20"];
    args.extend_from_slice(&QUICK[..4]);
    let out = rerum(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.path().join("curves/qini_curve.csv")).unwrap().lines().count(), 21);
    assert!(!dir.path().join("curves/report.json").exists());
}

#[test]
fn eval_rejects_other_schema() {
    let dir = TempDir::new().unwrap();
    assert!(train_quick(dir.path(), "run", &[]).status.success());
    let out = rerum(
        dir.path(),
        &["eval", "--checkpoint", "run/checkpoint.json", "--out", "eval", "--data.synthetic.n", "500", "--data.synthetic.d_numeric", "4"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("fingerprint"), "{}", stderr(&out));
    assert!(!dir.path().join("eval").exists());
}

#[test]
fn missing_input_is_named() {
    let dir = TempDir::new().unwrap();
    let out = rerum(dir.path(), &["train", "--data", "no-such-file.csv", "--out", "run"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no-such-file.csv"), "{}", stderr(&out));
    assert!(!dir.path().join("run").exists());

    let out = rerum(dir.path(), &["eval", "--checkpoint", "gone.json", "--out", "e"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("gone.json"));
}

#[test]
fn existing_outputs_need_overwrite() {
    let dir = TempDir::new().unwrap();
    let synth = |extra: &[&str]| {
        let mut args = vec!["synth", "--out", "s", "--data.synthetic.n", "50"];
        args.extend_from_slice(extra);
        rerum(dir.path(), &args)
    };
    assert!(synth(&[]).status.success());
    let refused = synth(&[]);
    assert!(!refused.status.success());
    assert!(stderr(&refused).contains("--overwrite"));
    // The refused run leaves the earlier artifacts in place.
    assert!(dir.path().join("s/data.csv").exists());
    assert!(synth(&["--overwrite"]).status.success());
}

#[test]
fn failed_training_removes_partial_outputs() {
    let dir = TempDir::new().unwrap();
    // Too few records per group for the batch size.
    let out = train_quick(dir.path(), "run", &["--data.synthetic.n", "100"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("run").exists());

    fs::create_dir(dir.path().join("keep")).unwrap();
    fs::write(dir.path().join("keep/notes.txt"), "mine").unwrap();
    let out = train_quick(dir.path(), "keep", &["--data.synthetic.n", "100"]);
    assert!(!out.status.success());
    let left: Vec<_> = fs::read_dir(dir.path().join("keep")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["notes.txt"]);
}

#[test]
fn bad_options_fail() {
    let dir = TempDir::new().unwrap();
    let out = rerum(dir.path(), &["train", "--train.batchsize", "4"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("train.batchsize"));
    assert!(!rerum(dir.path(), &["fly"]).status.success());
    assert!(!rerum(dir.path(), &["train", "--config", "nothing.json"]).status.success());
}

#[test]
fn csv_training_matches_in_memory_generation() {
    let dir = TempDir::new().unwrap();
    let synth = rerum(dir.path(), &["synth", "--out", "s", "--data.synthetic.n", "3000", "--data.synthetic.d_numeric", "3"]);
    assert!(synth.status.success());
    let from_csv = train_quick(dir.path(), "a", &["--data", "s/data.csv", "--data.schema_file", "s/schema.json"]);
    assert!(from_csv.status.success(), "{}", stderr(&from_csv));
    assert!(train_quick(dir.path(), "b", &[]).status.success());
    assert_eq!(
        fs::read(dir.path().join("a/checkpoint.json")).unwrap(),
        fs::read(dir.path().join("b/checkpoint.json")).unwrap()
    );
}
