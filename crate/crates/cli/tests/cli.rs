//! End-to-end tests of the binary: dataset ingestion, report schema,
//! exit-status discipline and report determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_redda"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is valid JSON")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("redda-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Two separated classes on columns x1/x3; x2 is noise. Labels appear in
/// the order b, a to pin the first-appearance mapping.
fn write_train(dir: &PathBuf) -> String {
    let mut lines = vec!["id,x1,x2,x3,class".to_owned()];
    let mut push = |id: usize, c: f64, noise: f64, class: &str| {
        lines.push(format!(
            "r{id},{:.3},{:.3},{:.3},{class}",
            c + 0.13 * (id as f64 % 7.0) - 0.39,
            noise,
            -c + 0.11 * (id as f64 % 5.0) - 0.22,
        ));
    };
    for i in 0..12 {
        push(i + 1, 2.0, 0.5 * (i as f64 % 3.0) - 0.5, "b");
    }
    for i in 12..24 {
        push(i + 1, -2.0, 0.4 * (i as f64 % 3.0) - 0.4, "a");
    }
    let path = dir.join("train.csv");
    fs::write(&path, lines.join("\n")).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_test_file(dir: &PathBuf) -> String {
    let content = "id,x1,x2,x3\nt1,2.0,0.0,-2.0\nt2,-2.0,0.0,2.0\nt3,40.0,40.0,40.0\n";
    let path = dir.join("test.csv");
    fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn label_mapping_follows_first_appearance() {
    let dir = workdir("map");
    let train = write_train(&dir);
    let out = run(&[
        "fit",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--gamma",
        "0",
        "--seed",
        "1",
    ]);
    let report = stdout_json(&out);
    let mapping = &report["dataset"]["label_mapping"];
    assert_eq!(mapping[0]["class"], "b");
    assert_eq!(mapping[0]["index"], 1);
    assert_eq!(mapping[1]["class"], "a");
    assert_eq!(mapping[1]["index"], 2);
    assert_eq!(report["dataset"]["n_rows"], 24);
    assert_eq!(report["dataset"]["n_features"], 3);
}

#[test]
fn selection_reports_names_and_one_based_indices() {
    let dir = workdir("select");
    let train = write_train(&dir);
    let out = run(&[
        "select-tbic",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--gamma",
        "0.08",
        "--n-start",
        "4",
        "--seed",
        "5",
    ]);
    let report = stdout_json(&out);
    let selected = report["result"]["selected"].as_array().unwrap();
    let names: Vec<&str> = selected
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert!(
        names.contains(&"x1") || names.contains(&"x3"),
        "selected {names:?}"
    );
    assert!(!names.contains(&"x2"), "noise column selected: {names:?}");
    for v in selected {
        let idx = v["index"].as_u64().unwrap();
        assert!((1..=3).contains(&idx));
    }
    // step log carries scores and row identifiers for replay
    let steps = report["result"]["steps"].as_array().unwrap();
    assert!(!steps.is_empty());
    assert!(steps[0]["tbic_grouping"].is_f64());
    assert!(steps[0]["grouping_trimmed_rows"].is_array());
}

#[test]
fn predict_posteriors_sum_to_one() {
    let dir = workdir("predict");
    let train = write_train(&dir);
    let test = write_test_file(&dir);
    let out = run(&[
        "predict",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--test",
        &test,
        "--gamma",
        "0",
        "--seed",
        "2",
    ]);
    let report = stdout_json(&out);
    let predictions = report["result"]["predictions"].as_array().unwrap();
    assert_eq!(predictions.len(), 3);
    for p in predictions {
        let total: f64 = p["posterior"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert_eq!(predictions[0]["label"], "b");
    assert_eq!(predictions[1]["label"], "a");
}

#[test]
fn detect_outliers_flags_the_far_row() {
    let dir = workdir("detect");
    let train = write_train(&dir);
    let test = write_test_file(&dir);
    let out = run(&[
        "detect-outliers",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--test",
        &test,
        "--gamma",
        "0",
        "--top-k",
        "1",
        "--seed",
        "2",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["result"]["ranking"][0], "t3");
    let flagged: Vec<&str> = report["result"]["scores"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["flagged"].as_bool().unwrap())
        .map(|s| s["row"].as_str().unwrap())
        .collect();
    assert_eq!(flagged, vec!["t3"]);
}

#[test]
fn simulate_reports_are_byte_identical() {
    let dir = workdir("simulate");
    let config = dir.join("config.json");
    fs::write(
        &config,
        r#"{
            "replications": 2,
            "n_train": 120,
            "n_test": 120,
            "scenarios": [{"n_label_noise": 4, "n_outliers": 2}],
            "methods": [
                {"label": "ml3", "selector": {"MlSubset": {"p": 3}}, "gamma": 0.05,
                 "n_start": 4, "n_init": 4}
            ],
            "seed": 31
        }"#,
    )
    .unwrap();
    let config = config.to_string_lossy().into_owned();
    let out_a = dir.join("a.json").to_string_lossy().into_owned();
    let out_b = dir.join("b.json").to_string_lossy().into_owned();
    assert!(run(&["simulate", "--config", &config, "--out", &out_a])
        .status
        .success());
    assert!(run(&["simulate", "--config", &config, "--out", &out_b])
        .status
        .success());
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical reports");

    // a different worker count changes nothing in the records
    let out_c = dir.join("c.json").to_string_lossy().into_owned();
    assert!(run(&[
        "simulate",
        "--config",
        &config,
        "--threads",
        "3",
        "--out",
        &out_c
    ])
    .status
    .success());
    let a_json: Value = serde_json::from_slice(&a).unwrap();
    let c_json: Value = serde_json::from_str(&fs::read_to_string(&out_c).unwrap()).unwrap();
    assert_eq!(a_json["result"]["records"], c_json["result"]["records"]);
}

#[test]
fn exit_codes_distinguish_error_categories() {
    let dir = workdir("errors");
    let train = write_train(&dir);

    // 3: unreadable input
    let out = run(&[
        "fit",
        "--train",
        "/definitely/missing.csv",
        "--label-col",
        "class",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]"));

    // 1: non-numeric cell, named by row and column
    let bad = dir.join("bad.csv");
    fs::write(&bad, "x1,x2,class\n1.0,2.0,a\nNA,3.0,b\n").unwrap();
    let out = run(&[
        "fit",
        "--train",
        &bad.to_string_lossy(),
        "--label-col",
        "class",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(msg.starts_with("error[validation]"), "{msg}");
    assert!(msg.contains("row 3") && msg.contains("x1"), "{msg}");

    // 1: out-of-range trimming level
    let out = run(&[
        "fit",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--gamma",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // 2: estimation cannot proceed (a class smaller than the subset
    // initialization needs)
    let tiny = dir.join("tiny.csv");
    fs::write(
        &tiny,
        "x1,x2,class\n1.0,2.0,a\n1.1,2.1,a\n5.0,6.0,b\n5.1,6.1,b\n",
    )
    .unwrap();
    let out = run(&[
        "select-mlsubset",
        "--train",
        &tiny.to_string_lossy(),
        "--label-col",
        "class",
        "--p",
        "2",
        "--gamma",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[estimation]"));

    // 0: success, timing on stderr only
    let out = run(&[
        "fit",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--gamma",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("completed in"), "{stderr}");
    assert!(!String::from_utf8_lossy(&out.stdout).contains("completed in"));
}

#[test]
fn single_class_training_file_is_rejected() {
    let dir = workdir("oneclass");
    let one = dir.join("one.csv");
    fs::write(&one, "x1,class\n1.0,a\n2.0,a\n").unwrap();
    let out = run(&[
        "fit",
        "--train",
        &one.to_string_lossy(),
        "--label-col",
        "class",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two distinct labels"));
}

#[test]
fn fit_report_is_self_contained_and_deterministic() {
    let dir = workdir("deterministic");
    let train = write_train(&dir);
    let out_a = dir.join("a.json").to_string_lossy().into_owned();
    let out_b = dir.join("b.json").to_string_lossy().into_owned();
    for out in [&out_a, &out_b] {
        assert!(run(&[
            "fit",
            "--train",
            &train,
            "--label-col",
            "class",
            "--id-col",
            "id",
            "--gamma",
            "0.1",
            "--n-start",
            "6",
            "--seed",
            "9",
            "--out",
            out,
        ])
        .status
        .success());
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    // the report echoes the resolved configuration
    let report: Value = serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(report["invocation"]["gamma"].as_f64(), Some(0.1));
    assert_eq!(report["invocation"]["seed"].as_u64(), Some(9));
    assert_eq!(report["invocation"]["n_start"].as_u64(), Some(6));
    assert_eq!(report["tool"]["name"], "redda");
}

#[test]
fn vars_flag_restricts_the_fit() {
    let dir = workdir("vars");
    let train = write_train(&dir);
    let out = run(&[
        "fit",
        "--train",
        &train,
        "--label-col",
        "class",
        "--id-col",
        "id",
        "--vars",
        "x1,3",
        "--gamma",
        "0",
        "--seed",
        "1",
    ]);
    let report = stdout_json(&out);
    let vars = report["result"]["variables"].as_array().unwrap();
    assert_eq!(vars.len(), 2);
    assert_eq!(vars[0]["name"], "x1");
    assert_eq!(vars[1]["name"], "x3");

    let out = run(&[
        "fit",
        "--train",
        &train,
        "--label-col",
        "class",
        "--vars",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
