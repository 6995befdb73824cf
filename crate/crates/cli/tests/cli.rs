use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn psbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psbo")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 120 rows: two numeric features, one categorical, label from a threshold
/// on `a` with the categorical feature flipping a band of it.
fn write_csv(dir: &Path) -> PathBuf {
    let mut s = String::from("a,b,color,class\n");
    for i in 0..120 {
        let a = (i * 37 % 120) as f64 / 120.0;
        let b = (i * 53 % 120) as f64 / 120.0;
        let color = ["red", "green", "blue"][i % 3];
        let yes = (a > 0.5) ^ (color == "blue" && b > 0.8);
        s.push_str(&format!("{a},{b},{color},{}\n", if yes { "yes" } else { "no" }));
    }
    let p = dir.join("toy.csv");
    std::fs::write(&p, s).unwrap();
    p
}

fn search(dir: &Path, data: &Path, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec!["search", "--data", data.to_str().unwrap(), "--target", "class", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    psbo(&args)
}

const FAST: &[&str] = &["--algorithms", "zero_r,naive_bayes,decision_tree,random_forest,linear_svm", "--seed", "7"];

#[test]
fn search_writes_report_trace_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let o = search(dir.path(), &data, FAST);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.json", "trace.jsonl", "model.json"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "psbo-report");
    assert_eq!(report["seed"], 7);
    let overrides = report["provenance"]["overrides"].as_object().unwrap();
    assert!(overrides.contains_key("seed") && overrides.contains_key("algorithms"));

    let t = psbo(&["trace", "--trace", dir.path().join("out/trace.jsonl").to_str().unwrap()]);
    assert!(t.status.success(), "{}", stderr(&t));
    let rounds = psbo(&["trace", "--trace", dir.path().join("out/trace.jsonl").to_str().unwrap(), "--kind", "round-start"]);
    assert_eq!(String::from_utf8_lossy(&rounds.stdout).lines().count(), 5);
}

#[test]
fn missing_target_is_a_usage_error_naming_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let o = psbo(&["search", "--data", data.to_str().unwrap(), "--target", "label"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("a, b, color, class"), "{e}");
}

#[test]
fn bad_config_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let o = search(dir.path(), &data, &["--technique-off", "9"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "tau = 2.0\n").unwrap();
    let o = search(dir.path(), &data, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau"));
}

#[test]
fn missing_data_file_is_a_runtime_error() {
    let o = psbo(&["search", "--data", "/nonexistent/x.csv", "--target", "class"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_merge_into_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "n_c = 5\nseed = 3\n").unwrap();
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend_from_slice(FAST);
    let o = search(dir.path(), &data, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let ov = &report["provenance"]["overrides"];
    assert_eq!(ov["n_c"], 5);
    // The flag wins over the file.
    assert_eq!(ov["seed"], 7);
}

#[test]
fn technique_3_off_uses_fixed_budgets_in_every_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let mut args = vec!["--technique-off", "3"];
    args.extend_from_slice(FAST);
    let o = search(dir.path(), &data, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("out/trace.jsonl")).unwrap();
    let starts: Vec<Value> = trace
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["kind"] == "round-start")
        .collect();
    assert_eq!(starts.len(), 5);
    for s in &starts {
        assert_eq!(s["fs_budget"], 900.0);
        assert_eq!(s["train_budget"], 9000.0);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let files = ["report.json", "trace.jsonl", "model.json"];
    assert!(search(dir.path(), &data, FAST).status.success());
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()).collect();
    assert!(search(dir.path(), &data, FAST).status.success());
    for (f, x) in files.iter().zip(first) {
        let y = std::fs::read(dir.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn predict_emits_one_label_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    assert!(search(dir.path(), &data, FAST).status.success());
    let model = dir.path().join("out/model.json");
    let o = psbo(&["predict", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let labels: Vec<String> = String::from_utf8_lossy(&o.stdout).lines().map(str::to_string).collect();
    assert_eq!(labels.len(), 120);
    assert!(labels.iter().all(|l| l == "yes" || l == "no"));

    let partial = dir.path().join("partial.csv");
    std::fs::write(&partial, "a,b\n0.1,0.2\n").unwrap();
    let o = psbo(&["predict", "--model", model.to_str().unwrap(), "--data", partial.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("color"));
}

#[test]
fn zero_r_model_predicts_the_majority() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let o = search(dir.path(), &data, &["--algorithms", "zero_r"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&data).unwrap();
    let yes = text.lines().skip(1).filter(|l| l.ends_with(",yes")).count();
    let majority = if yes * 2 > 120 { "yes" } else { "no" };
    let model = dir.path().join("out/model.json");
    let o = psbo(&["predict", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(out.lines().all(|l| l == majority));
}

#[test]
fn model_version_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    assert!(search(dir.path(), &data, &["--algorithms", "zero_r"]).status.success());
    let model = dir.path().join("out/model.json");
    let text = std::fs::read_to_string(&model).unwrap().replace("\"version\":1", "\"version\":99");
    std::fs::write(&model, text).unwrap();
    let o = psbo(&["predict", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("version 99"));
}

#[test]
fn bench_single_seed_flags_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let out = dir.path().join("bench");
    let o = psbo(&[
        "bench",
        "--data",
        data.to_str().unwrap(),
        "--target",
        "class",
        "--seeds",
        "1",
        "--algorithms",
        "zero_r,naive_bayes,decision_tree",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(table.contains("random-search") && table.contains("(single run)"), "{table}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    for s in report["summaries"].as_array().unwrap() {
        assert_eq!(s["error_std"], 0.0);
        assert_eq!(s["single_run"], true);
    }
    assert!(out.join("cells.csv").is_file());
    assert_eq!(std::fs::read_dir(out.join("traces")).unwrap().count(), 2);
}
