use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use spnet_cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, MODEL_FILE, NETWORK_FILE, SPLIT_FILE, TRAIN_LOG_FILE};
use spnet_core::data::{Manifest, ManifestEntry, IMAGE_DIR, MANIFEST_NAME};

fn spnet(args: &[&str]) -> i32 {
    run(std::iter::once("spnet").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_a_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert_eq!(spnet(&["synth", "--count", "16", "--out", p(&d), "--seed", "7", "--size", "64x80"]), EXIT_OK);
    assert_eq!(fs::read_dir(d.join(IMAGE_DIR)).unwrap().count(), 16);
    let manifest = Manifest::read(d.join(MANIFEST_NAME)).unwrap();
    assert_eq!(manifest.len(), 16);
    assert!(manifest.iter().all(|(_, e)| e.point().is_some()));
    let echo = json(&d.join("command.json"));
    assert_eq!(echo["seed"], 7);
    assert_eq!(echo["command"][1], "synth");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(spnet(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(spnet(&["synth", "--count", "2"]), EXIT_USAGE);
    assert_eq!(spnet(&["train", "--data", "d", "--out", "o", "--size", "64"]), EXIT_USAGE);
    assert_eq!(spnet(&["train", "--data", "d", "--out", "o", "--phase", "3"]), EXIT_USAGE);
    assert_eq!(spnet(&["--help"]), EXIT_OK);
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    assert_eq!(spnet(&["train", "--data", p(&missing), "--out", p(&tmp.path().join("m"))]), EXIT_RUNTIME);
    assert_eq!(
        spnet(&["eval", "--pred", p(&missing), "--truth", p(&missing), "--out", p(&tmp.path().join("r"))]),
        EXIT_RUNTIME
    );
    assert_eq!(spnet(&["predict", "--model", p(&missing), "--input", p(&missing), "--out", "x.csv"]), EXIT_RUNTIME);
}

#[test]
fn binary_reports_usage_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_spnet")).arg("--bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn train_predict_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let m = tmp.path().join("m");
    assert_eq!(spnet(&["synth", "--count", "5", "--out", p(&d), "--seed", "3", "--size", "64x80"]), EXIT_OK);
    // a labelled "no singular point" image is loaded but never trained on
    let mut manifest = Manifest::read(d.join(MANIFEST_NAME)).unwrap();
    manifest.set("whorl_0004.png", ManifestEntry::NoSingularPoint);
    manifest.write_atomic(d.join(MANIFEST_NAME)).unwrap();

    assert_eq!(
        spnet(&["train", "--data", p(&d), "--out", p(&m), "--epochs", "1", "--size", "64x80", "--batch-size", "2"]),
        EXIT_OK
    );
    for f in [MODEL_FILE, NETWORK_FILE, TRAIN_LOG_FILE, SPLIT_FILE] {
        assert!(m.join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(m.join(TRAIN_LOG_FILE)).unwrap();
    let rows: Vec<&str> = log.lines().collect();
    assert_eq!(rows[0], "epoch,phase,mean_loss,seconds");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,1,") && rows[2].starts_with("1,2,"));

    let network = json(&m.join(NETWORK_FILE));
    assert_eq!(network["phases_trained"], serde_json::json!([1, 2]));
    assert_eq!(network["train"]["mask_half_width"], 5);
    assert_eq!(network["commands"][0][1], "train");
    let split = json(&m.join(SPLIT_FILE));
    assert_eq!(split["train"].as_array().unwrap().len() + split["test"].as_array().unwrap().len(), 4);

    let pred = tmp.path().join("pred.csv");
    assert_eq!(spnet(&["predict", "--model", p(&m), "--input", p(&d), "--out", p(&pred)]), EXIT_OK);
    let predictions = Manifest::read(&pred).unwrap();
    assert_eq!(predictions.len(), 5);
    for (_, e) in predictions.iter() {
        let pt = e.point().unwrap();
        assert!(pt.inside(80, 64), "{pt:?}");
    }
    assert!(tmp.path().join("pred.csv.meta.json").is_file());

    let test_pred = tmp.path().join("test.csv");
    assert_eq!(
        spnet(&["predict", "--model", p(&m), "--input", p(&d), "--subset", "test", "--out", p(&test_pred)]),
        EXIT_OK
    );
    assert_eq!(Manifest::read(&test_pred).unwrap().len(), split["test"].as_array().unwrap().len());

    let report_dir = tmp.path().join("report");
    let truth = d.join(MANIFEST_NAME);
    assert_eq!(
        spnet(&["eval", "--pred", p(&pred), "--truth", p(&truth), "--threshold", "20", "--out", p(&report_dir)]),
        EXIT_OK
    );
    let report = json(&report_dir.join("report.json"));
    let tdr = report["tdr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&tdr));
    assert_eq!(report["samples"].as_array().unwrap().len(), 4);
    assert_eq!(report["excluded_without_ground_truth"], 1);
    assert_eq!(report["config"]["threshold"], 20.0);
    for f in ["distances.csv", "curve.svg", "command.json"] {
        assert!(report_dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn phases_can_run_separately() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let m = tmp.path().join("m");
    assert_eq!(spnet(&["synth", "--count", "3", "--out", p(&d), "--size", "64x80"]), EXIT_OK);
    let base = ["train", "--data", p(&d), "--out", p(&m), "--epochs", "1", "--size", "64x80"];

    assert_eq!(spnet(&[&base[..], &["--phase", "2"]].concat()), EXIT_RUNTIME);
    assert_eq!(spnet(&[&base[..], &["--phase", "1"]].concat()), EXIT_OK);
    let pred = tmp.path().join("p.csv");
    // phase 2 has not run, so there is nothing to predict with
    assert_eq!(spnet(&["predict", "--model", p(&m), "--input", p(&d), "--out", p(&pred)]), EXIT_RUNTIME);

    let before = fs::read(m.join(MODEL_FILE)).unwrap();
    assert_eq!(spnet(&[&base[..], &["--phase", "2", "--seed", "99"]].concat()), EXIT_OK);
    assert_ne!(fs::read(m.join(MODEL_FILE)).unwrap(), before);
    assert_eq!(json(&m.join(NETWORK_FILE))["phases_trained"], serde_json::json!([1, 2]));
    assert_eq!(json(&m.join(NETWORK_FILE))["commands"].as_array().unwrap().len(), 2);
    let log = fs::read_to_string(m.join(TRAIN_LOG_FILE)).unwrap();
    assert_eq!(log.lines().skip(1).map(|l| &l[..4]).collect::<Vec<_>>(), ["1,1,", "1,2,"]);

    assert_eq!(spnet(&["predict", "--model", p(&m), "--input", p(&d), "--out", p(&pred)]), EXIT_OK);
    assert_eq!(
        spnet(&[&base[..4], &[p(&m), "--epochs", "1", "--size", "32x40", "--phase", "2"]].concat()),
        EXIT_RUNTIME
    );
}

#[test]
fn baseline_finds_synthetic_whorls() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert_eq!(spnet(&["synth", "--count", "3", "--out", p(&d), "--seed", "5", "--size", "128x128"]), EXIT_OK);
    let out = tmp.path().join("baseline.csv");
    assert_eq!(spnet(&["baseline", "--input", p(&d.join(IMAGE_DIR)), "--out", p(&out)]), EXIT_OK);
    let found = Manifest::read(&out).unwrap();
    let truth = Manifest::read(d.join(MANIFEST_NAME)).unwrap();
    assert_eq!(found.len(), 3);
    for (id, gt) in truth.iter() {
        let pt = found.get(id).and_then(|e| e.point()).expect("a detection");
        assert!(pt.distance(gt.point().unwrap()) <= 10.0, "{id}: {pt:?} vs {gt:?}");
    }
    let meta = json(&tmp.path().join("baseline.csv.meta.json"));
    assert_eq!(meta["block_size"], 8);
}

#[test]
fn non_image_inputs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let txt = tmp.path().join("notes.txt");
    fs::write(&txt, "hello").unwrap();
    assert_eq!(spnet(&["baseline", "--input", p(&txt), "--out", p(&tmp.path().join("b.csv"))]), EXIT_RUNTIME);
}
