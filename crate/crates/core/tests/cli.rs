//! Command-line contract: exit codes, output files, manifests, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use broadlearn::cli::RunManifest;
use broadlearn::data::{self, FileFormat};
use broadlearn::persist;
use broadlearn::synth;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_broadlearn"));
    c.env_remove("BROADLEARN_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// The manifest lines a run printed on stderr.
fn stderr_manifests(out: &Output) -> Vec<RunManifest> {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .filter_map(|l| serde_json::from_str::<RunManifest>(l).ok())
        .collect()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn fixture_train_reaches_target_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("m.jsonl");
    let model = dir.path().join("m.blsm");
    let out = run(&["train", "--fixture", "--model-out", p(&model), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&report)[0];
    assert_eq!(r["record"], "train");
    assert_eq!(r["train_samples"], 600);
    assert_eq!(r["test_samples"], 150);
    assert!(r["test_ac"].as_f64().unwrap() >= 0.98);
    assert!(r["test_pc"].is_f64());
    assert!(r["train_seconds"].is_f64());
    assert!(model.exists());

    let out = run(&["train", "--fixture", "--er", "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&report)[0];
    assert_eq!(r["path"], "er-bls");
    assert!(r["test_ac"].as_f64().unwrap() >= 0.98);
}

#[test]
fn missing_features_is_a_usage_error() {
    let out = run(&["train"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--features"), "{err}");
    assert!(err.contains("Usage"), "{err}");
    assert_eq!(stderr_manifests(&out).len(), 1);

    assert_eq!(run(&["train", "--fixture", "--n1", "0"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--fixture", "--n1", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn large_node_counts_are_taken_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("m.jsonl");
    let model = dir.path().join("m.blsm");
    let out = run(&[
        "train", "--fixture", "--n1", "12", "--n2", "54", "--n3", "2296", "--model-out", p(&model), "--report", p(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&report)[0];
    assert_eq!((r["n1"].as_u64(), r["n2"].as_u64(), r["n3"].as_u64()), (Some(12), Some(54), Some(2296)));
    assert_eq!(r["feature_nodes"], 648);
    assert_eq!(r["enhancement_nodes"], 2296);
    let loaded = persist::load_model(&model).unwrap();
    assert_eq!(loaded.bls.hyper().n3, 2296);
}

#[test]
fn grow_defaults_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.blsm");
    let log = dir.path().join("growth.jsonl");
    let base = ["--fixture", "--n1", "4", "--n2", "5", "--n3", "100"];
    let mut args = vec!["train", "--grow-capable", "--model-out", p(&model)];
    args.extend(base);
    assert_eq!(run(&args).status.code(), Some(0));

    let out = run(&["grow", "--fixture", "--model-in", p(&model), "--verify", "--report", p(&log)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["grow", "--fixture", "--model-in", p(&model), "--report", p(&log)]);
    assert_eq!(out.status.code(), Some(0));

    let rows = records(&log);
    assert_eq!(rows.len(), 2, "growth log is appended to");
    assert_eq!(rows[0]["feature_nodes"], 20 + 20);
    assert_eq!(rows[0]["enhancement_nodes"], 100 + 500);
    assert_eq!(rows[1]["feature_nodes"], 20 + 40);
    assert_eq!(rows[1]["enhancement_nodes"], 100 + 1000);
    assert_eq!(rows[1]["step"], 2);
    for r in &rows {
        assert!(r["train_ac"].is_f64());
        assert!(r["seconds"].is_f64());
    }
    assert!(rows[0]["max_abs_deviation"].as_f64().unwrap() <= 1e-6);
    assert!(rows[0]["relative_deviation"].as_f64().unwrap() <= 1e-6);
    let grown = persist::load_model(&model).unwrap();
    assert_eq!(grown.bls.enhancement_node_count(), 1100);
}

#[test]
fn growing_a_plain_model_is_a_state_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.blsm");
    assert_eq!(run(&["train", "--fixture", "--n3", "50", "--model-out", p(&model)]).status.code(), Some(0));
    let before = std::fs::read(&model).unwrap();
    let out = run(&["grow", "--fixture", "--model-in", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert_eq!(std::fs::read(&model).unwrap(), before);

    let missing = dir.path().join("nope.blsm");
    assert_eq!(run(&["grow", "--fixture", "--model-in", p(&missing)]).status.code(), Some(2));
}

#[test]
fn failed_runs_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.blsm");
    let report = dir.path().join("r.jsonl");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,label\n1,2,0\n3,oops,1\n").unwrap();
    let out = run(&["train", "--features", p(&bad), "--model-out", p(&model), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(files_in(dir.path()), vec![bad.clone()]);

    // a dimension mismatch surfaces after loading; still nothing written
    let other = dir.path().join("other.csv");
    std::fs::write(&other, "a,label\n1,0\n2,1\n").unwrap();
    let good = dir.path().join("good.csv");
    let d = synth::blobs(10, 2, 3, 3.0, 0).unwrap();
    data::save_features(&good, &d, FileFormat::Csv).unwrap();
    let out = run(&[
        "train", "--features", p(&good), "--test-features", p(&other), "--model-out", p(&model), "--report", p(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!model.exists() && !report.exists());
}

#[test]
fn every_run_emits_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.json");
    let report = dir.path().join("r.jsonl");
    let out = run(&["--manifest", p(&manifest), "scale", "--lambda", "2", "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr_manifests(&out).is_empty());
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.lines().count(), 1);
    let m: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.command, "scale");
    assert_eq!(m.exit_code, 0);
    assert_eq!(m.outputs, vec![report.clone()]);
    assert!(m.finished_unix >= m.started_unix && m.wall_seconds >= 0.0);
    assert_eq!(m.config["scale"]["lambda"], 2.0);

    for (args, code) in [
        (vec!["train", "--fixture", "--n3", "20"], 0),
        (vec!["train"], 1),
        (vec!["predict", "--fixture", "--model-in", "/nonexistent/m.blsm"], 2),
        (vec!["bogus"], 1),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let ms = stderr_manifests(&out);
        assert_eq!(ms.len(), 1, "{args:?}");
        assert_eq!(ms[0].exit_code, code);
        assert_eq!(ms[0].error.is_some(), code != 0);
    }
}

#[test]
fn sweep_search_and_scale_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = run(&["sweep", "--fixture", "--n1", "12", "--n2", "54", "--n3-list", "300", "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let rows = records(&report);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["feature_nodes"], 648);
    assert_eq!(rows[0]["enhancement_nodes"], 300);
    assert!(rows[0]["seconds"].is_f64() && rows[0]["test_ac"].is_f64());

    for halving in [false, true] {
        let mut args = vec![
            "search", "--fixture", "--budget", "4", "--n1-range", "3:3", "--n2-range", "2:2", "--n3-range", "70:70",
            "--lambda-choices", "0.001", "--report", p(&report),
        ];
        if halving {
            args.push("--halving");
        }
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = records(&report);
        let best = rows.last().unwrap();
        assert_eq!(best["record"], "best");
        assert_eq!((best["n1"].as_u64(), best["n2"].as_u64(), best["n3"].as_u64()), (Some(3), Some(2), Some(70)));
        assert_eq!(best["lambda"], 0.001);
        assert!(rows[..rows.len() - 1].iter().all(|r| r["record"] == "trial"));
    }

    let out = run(&["scale", "--lambda", "0", "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("d=1 w=1 r=1 "));
    let r = &records(&report)[0];
    assert_eq!((r["depth"].as_f64(), r["width"].as_f64(), r["resolution"].as_f64()), (Some(1.0), Some(1.0), Some(1.0)));
    assert_eq!(run(&["scale", "--alpha", "0.5"]).status.code(), Some(2));
}

#[test]
fn predict_interpolates_the_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.blsm");
    let report = dir.path().join("r.jsonl");
    let scores = dir.path().join("s.csv");
    assert_eq!(run(&["train", "--fixture", "--n3", "800", "--model-out", p(&model)]).status.code(), Some(0));
    let out = run(&[
        "predict", "--fixture", "--subset", "train", "--model-in", p(&model), "--out", p(&scores), "--report", p(&report),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&report)[0];
    assert_eq!(r["samples"], 600);
    assert_eq!(r["accuracy"], 1.0);
    let mut csv = csv::Reader::from_path(&scores).unwrap();
    assert_eq!(csv.headers().unwrap(), vec!["id", "label", "score_0", "score_1", "score_2"]);
    assert_eq!(csv.records().count(), 600);
}

#[test]
fn feature_files_drive_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let all = synth::blobs_fixture_data(3).unwrap();
    let ids: Vec<String> = (0..all.len()).map(|i| format!("img{i:04}")).collect();
    let all = all.with_ids(ids).unwrap();
    let model = dir.path().join("m.blsm");
    for format in [FileFormat::Fmx, FileFormat::Csv] {
        let ext = if format == FileFormat::Fmx { "fmx" } else { "csv" };
        let path = dir.path().join(format!("feat.{ext}"));
        data::save_features(&path, &all, format).unwrap();
        let report = dir.path().join(format!("{ext}.jsonl"));
        let out = run(&[
            "train", "--features", p(&path), "--labels-in-file", "--n3", "100", "--model-out", p(&model), "--report", p(&report),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(records(&report)[0]["test_ac"].as_f64().unwrap() >= 0.98);

        let scores = dir.path().join(format!("{ext}.scores.csv"));
        let out = run(&[
            "predict", "--features", p(&path), "--labels-in-file", "--model-in", p(&model), "--out", p(&scores),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let mut csv = csv::Reader::from_path(&scores).unwrap();
        let first = csv.records().next().unwrap().unwrap();
        // FMX carries no sample ids, so rows are numbered
        assert_eq!(&first[0], if format == FileFormat::Csv { "img0000" } else { "0" });
    }

    // a truncated FMX file is a data error
    let fmx = dir.path().join("feat.fmx");
    let bytes = std::fs::read(&fmx).unwrap();
    let cut = dir.path().join("cut.fmx");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(run(&["train", "--features", p(&cut)]).status.code(), Some(2));
    // --format wins over the extension
    let renamed = dir.path().join("feat.bin");
    std::fs::copy(&fmx, &renamed).unwrap();
    assert_eq!(run(&["train", "--features", p(&renamed), "--format", "fmx", "--n3", "30"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--features", p(&renamed), "--format", "xml"]).status.code(), Some(1));
}

/// Drop fields that measure time; everything else must match exactly.
fn mask_timing(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.retain(|k, _| k != "seconds" && k != "train_seconds");
            }
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn commands_are_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut snapshots = Vec::new();
    for dir in &dirs {
        let d = dir.path();
        let j = |name: &str| d.join(name).to_str().unwrap().to_string();
        let runs: Vec<Vec<String>> = vec![
            vec!["train", "--fixture", "--grow-capable", "--n3", "150", "--seed", "7", "--er", "--model-out", &j("m.blsm"), "--report", &j("train.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["train", "--fixture", "--target-ac", "1.0", "--max-steps", "2", "--add-feat", "3", "--add-enh", "40", "--n3", "20", "--seed", "7", "--model-out", &j("t.blsm"), "--report", &j("target.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["grow", "--fixture", "--model-in", &j("m.blsm"), "--add-feat", "5", "--add-enh", "60", "--steps", "2", "--report", &j("grow.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["predict", "--fixture", "--model-in", &j("m.blsm"), "--out", &j("scores.csv"), "--report", &j("predict.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["search", "--fixture", "--budget", "5", "--n3-range", "10:200", "--seed", "7", "--report", &j("search.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["search", "--fixture", "--halving", "--budget", "9", "--n3-range", "10:200", "--seed", "7", "--report", &j("halving.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["sweep", "--fixture", "--n3-list", "20,60", "--seed", "7", "--report", &j("sweep.jsonl")]
                .into_iter().map(String::from).collect(),
            vec!["scale", "--lambda", "1.5", "--report", &j("scale.jsonl")].into_iter().map(String::from).collect(),
        ];
        for args in &runs {
            let out = bin().args(args).output().unwrap();
            assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let mut snap = Vec::new();
        for f in files_in(d) {
            let name = f.file_name().unwrap().to_string_lossy().into_owned();
            let bytes = std::fs::read(&f).unwrap();
            let content = if name.ends_with(".jsonl") {
                mask_timing(&String::from_utf8(bytes).unwrap()).into_bytes()
            } else {
                bytes
            };
            snap.push((name, content));
        }
        snapshots.push(snap);
    }
    assert_eq!(snapshots[0].len(), 11);
    for (a, b) in snapshots[0].iter().zip(&snapshots[1]) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0);
    }
}

#[test]
fn library_entry_point_matches_the_binary() {
    // cli::run is what main calls; check it in-process once
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let code = broadlearn::cli::run(["broadlearn", "--manifest", p(&manifest), "scale", "--lambda", "0"]);
    assert_eq!(code, 0);
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m.command, "scale");
}
