use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;
use wallscan::radargram::{load_bscan, WallSpec};
use wallscan::synth::SynthConfig;

fn wallscan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wallscan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_json(path: &Path, v: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// A 21-scan benchmark with short scans, written to `dir/scans`.
fn small_benchmark(dir: &Path) {
    write_json(&dir.join("bench.json"), &json!({"kind": "benchmark", "preset": {"seed": 3, "n_traces": 80, "studs_per_scan": 1}}));
    let o = wallscan(dir, &["--out-dir", "scans", "synth", "--config", "bench.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_single_scan_round_trips() {
    let tmp = TempDir::new().unwrap();
    let cfg = SynthConfig { n_traces: 30, stud_positions_m: vec![0.05], seed: 11, ..SynthConfig::default() };
    write_json(
        &tmp.path().join("one.json"),
        &json!({"kind": "single", "scan_id": "X1", "spec": WallSpec::interior(), "config": cfg}),
    );
    let o = wallscan(tmp.path(), &["--out-dir", "out", "synth", "--config", "one.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scan = load_bscan(&tmp.path().join("out/X1.csv")).unwrap();
    assert_eq!(scan.scan.n_traces(), 30);
    assert_eq!(scan.wall_spec, Some(WallSpec::interior()));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_synth_config_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = SynthConfig { n_traces: 0, ..SynthConfig::default() };
    write_json(
        &tmp.path().join("bad.json"),
        &json!({"kind": "single", "scan_id": "X1", "spec": WallSpec::interior(), "config": cfg}),
    );
    let o = wallscan(tmp.path(), &["synth", "--config", "bad.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_traces"));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&wallscan(tmp.path(), &["train", "--no-such-flag"])), 1);
    assert_eq!(code(&wallscan(tmp.path(), &["train", "--model", "forest", "--lambda", "0.1"])), 1);
    assert_eq!(code(&wallscan(tmp.path(), &["select", "--method", "nope"])), 1);
    assert_eq!(code(&wallscan(tmp.path(), &["run"])), 1);
    assert_eq!(code(&wallscan(tmp.path(), &["--jobs", "0", "train"])), 1);
    assert_eq!(code(&wallscan(tmp.path(), &["--help"])), 0);
}

#[test]
fn missing_scan_directory_is_a_runtime_failure() {
    let tmp = TempDir::new().unwrap();
    let o = wallscan(tmp.path(), &["train", "--scans", "absent", "--model", "knn"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage prepare"));
}

#[test]
fn train_writes_reproducible_outputs() {
    let tmp = TempDir::new().unwrap();
    small_benchmark(tmp.path());
    let args = |out: &'static str| {
        vec!["--seed", "5", "--jobs", "2", "--out-dir", out, "train", "--scans", "scans", "--model", "forest", "--n-trees", "15"]
    };
    for out in ["a", "b"] {
        let o = wallscan(tmp.path(), &args(out));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| std::fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("a/report.json"), read("b/report.json"));
    assert_eq!(read("a/manifest.json"), read("b/manifest.json"));
    let report: serde_json::Value = serde_json::from_slice(&read("a/report.json")).unwrap();
    assert!(report["test_accuracy"]["mean"].as_f64().unwrap() > 0.9);
}

#[test]
fn run_config_with_overrides_and_plot() {
    let tmp = TempDir::new().unwrap();
    small_benchmark(tmp.path());
    write_json(
        &tmp.path().join("exp.json"),
        &json!({
            "task": "stud_detection",
            "scans": {"kind": "directory", "path": "scans"},
            "model": {"kind": "tree", "max_depth": 4},
            "selection": {"method": "pfi", "n_repeats": 2},
            "seeds": [0, 1]
        }),
    );
    let o = wallscan(tmp.path(), &["--out-dir", "run", "run", "--config", "exp.json", "--gamma", "0.6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["gamma"].as_f64(), Some(0.6));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("run/importance.csv").exists());

    std::fs::remove_file(tmp.path().join("run/importance.svg")).unwrap();
    let o = wallscan(tmp.path(), &["--out-dir", "figs", "plot", "--input", "run", "--scan", "scans/I1.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["importance.svg", "bands.svg", "heatmap.svg"] {
        let svg = std::fs::read_to_string(tmp.path().join("figs").join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
}

#[test]
fn plot_with_nothing_to_draw_fails_validation() {
    let tmp = TempDir::new().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&wallscan(tmp.path(), &["plot", "--input", "empty"])), 1);
}

#[test]
fn select_agglomerate_and_label() {
    let tmp = TempDir::new().unwrap();
    small_benchmark(tmp.path());
    let o = wallscan(
        tmp.path(),
        &[
            "--out-dir", "sel", "select", "--method", "agglomerate", "--max-clusters", "6", "--repeats", "2",
            "--scans", "scans", "--model", "forest", "--n-trees", "10",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(tmp.path().join("sel/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 6);

    let o = wallscan(tmp.path(), &["--out-dir", "relabeled", "label", "--scans", "scans", "--calibrate-on", "I1,G3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let before = load_bscan(&tmp.path().join("scans/D1.csv")).unwrap();
    let after = load_bscan(&tmp.path().join("relabeled/D1.csv")).unwrap();
    let agree = before
        .stud_labels
        .unwrap()
        .per_trace
        .iter()
        .zip(&after.stud_labels.unwrap().per_trace)
        .filter(|(a, b)| a == b)
        .count();
    assert!(agree as f64 / before.scan.n_traces() as f64 > 0.9);
}
