//! End-to-end runs of the `platebead` binary on reduced-scale problems.

use std::path::Path;
use std::process::{Command, Output};

use platebead_core::grid::Grid;
use platebead_core::io::write_bpat;
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_opt::dataset::Dataset;
use platebead_opt::flow::{flow_eval_loss, FlowModel};
use platebead_opt::surrogate::{surrogate_eval_loss, SurrogateModel};
use tempfile::TempDir;

fn platebead(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platebead"))
        .args(args)
        .output()
        .expect("failed to launch the platebead binary")
}

fn run_ok(args: &[&str]) -> String {
    let out = platebead(args);
    assert!(
        out.status.success(),
        "platebead {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("run_manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn flow_dataset_training_writes_loss_curve_and_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    let model = tmp.path().join("model");
    run_ok(&[
        "gen-dataset", "--flavor", "flow", "--count", "16", "--test-scale",
        "--out", ds.to_str().unwrap(),
    ]);
    let m = manifest(&ds);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "gen-dataset");
    assert!(ds.join("manifest.json").exists());

    let stdout = run_ok(&[
        "train", "--model", "flow", "--data", ds.to_str().unwrap(),
        "--epochs", "2", "--batch", "8", "--base", "4",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(stdout.contains("trained 2 epochs"), "{stdout}");
    assert!(model.join("flow.nnck").exists());
    let loss = std::fs::read_to_string(model.join("loss.csv")).unwrap();
    let lines: Vec<&str> = loss.lines().collect();
    assert_eq!(lines[0], "epoch,loss");
    assert_eq!(lines.len(), 3, "one row per epoch plus the header");
    let m = manifest(&model);
    assert_eq!(m["status"], "ok");
    assert!(m["timings_seconds"]["train"].as_f64().unwrap() > 0.0);

    // a reloaded checkpoint reproduces the final reported loss
    let final_loss: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    let reloaded = FlowModel::load(&model.join("flow.nnck")).unwrap();
    let dataset = Dataset::load(&ds).unwrap();
    let patterns: Vec<Grid> = dataset.samples.iter().map(|s| s.pattern.clone()).collect();
    let recomputed =
        flow_eval_loss(&reloaded.net, &reloaded.params, &patterns, 8, 0).unwrap();
    assert!(
        (recomputed - final_loss).abs() < 1e-6,
        "reloaded checkpoint gives loss {recomputed}, curve ended at {final_loss}"
    );
}

#[test]
fn dataset_generation_is_seed_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "gen-dataset", "--flavor", "flow", "--count", "4", "--test-scale",
            "--seed", "7", "--out", out.to_str().unwrap(),
        ]);
    }
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "run_manifest.json" {
            continue; // contains the differing --out path and wall timings
        }
        let bytes_a = std::fs::read(a.join(&name)).unwrap();
        let bytes_b = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name:?} differs between identical seeds");
    }
}

#[test]
fn surrogate_training_on_a_tiny_fem_dataset() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    let model = tmp.path().join("model");
    run_ok(&[
        "gen-dataset", "--flavor", "surrogate", "--count", "4", "--test-scale",
        "--freqs", "4", "--fmin", "20", "--fmax", "200",
        "--out", ds.to_str().unwrap(),
    ]);
    run_ok(&[
        "train", "--model", "surrogate", "--data", ds.to_str().unwrap(),
        "--epochs", "2", "--batch", "2", "--base", "4",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(model.join("surrogate.nnck").exists());
    assert_eq!(manifest(&model)["status"], "ok");

    let loss = std::fs::read_to_string(model.join("loss.csv")).unwrap();
    let final_loss: f64 = loss.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let reloaded = SurrogateModel::load(&model.join("surrogate.nnck")).unwrap();
    let dataset = Dataset::load(&ds).unwrap();
    let recomputed =
        surrogate_eval_loss(&reloaded.net, &reloaded.params, &dataset, 2, 0).unwrap();
    assert!(
        (recomputed - final_loss).abs() < 1e-6,
        "reloaded checkpoint gives loss {recomputed}, curve ended at {final_loss}"
    );
}

#[test]
fn validate_flat_pattern_finds_the_first_resonance() {
    let tmp = TempDir::new().unwrap();
    let plate = PlateConfig::free_rotation();
    let pattern = BeadingPattern::flat(&plate, 24, 36);
    let bpat = tmp.path().join("flat.bpat");
    write_bpat(&bpat, &pattern).unwrap();
    let out = tmp.path().join("val");
    let stdout = run_ok(&[
        "validate", "--pattern", bpat.to_str().unwrap(),
        "--fmin", "20", "--fmax", "40", "--df", "1",
        "--mesh-nx", "24", "--mesh-ny", "16",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("compliance 1.0000"), "{stdout}");

    let csv = std::fs::read_to_string(out.join("frf.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "frequency_hz,level_db");
    assert_eq!(lines.len(), 22, "21 frequencies on the 20..40 Hz grid plus header");
    let peak = lines[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            let f: f64 = it.next().unwrap().parse().unwrap();
            let lv: f64 = it.next().unwrap().parse().unwrap();
            (f, lv)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(
        (peak.0 - 29.1).abs() <= 2.0,
        "first resonance peak at {} Hz, expected near 29.1 Hz",
        peak.0
    );
}

#[test]
fn rotation_optimize_then_single_run_report() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let stdout = run_ok(&[
        "optimize", "--method", "rotation", "--f1", "10", "--f2", "200",
        "--mesh-nx", "24", "--mesh-ny", "16",
        "--pattern-h", "24", "--pattern-w", "36",
        "--val-freqs", "5", "--k", "1",
        "--out", run.to_str().unwrap(),
    ]);
    assert!(stdout.contains("rotation: validated min"), "{stdout}");
    let m = manifest(&run);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["nfe_total"], 0, "the rotation heuristic consumes no surrogate NFE");
    assert!(run.join("pattern_0.pgm").exists());
    assert!(run.join("pattern_0.bpat").exists());
    assert!(run.join("best_frf.csv").exists());

    let cmp = std::fs::read_to_string(run.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = cmp.lines().collect();
    assert_eq!(lines[0], "method,predicted_best,validated_min,gap_of_min,plates,nfe,wall_seconds");
    assert_eq!(lines.len(), 2);

    let rep = tmp.path().join("report");
    run_ok(&["report", "--runs", run.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    let table = std::fs::read_to_string(rep.join("report.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,objective_mean,objective_std,nfe,plates,wall_seconds");
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[0], "rotation");
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0, "single run must report zero spread");
    // mean equals the single run's validated minimum
    let validated: f64 = cmp.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let mean: f64 = row[1].parse().unwrap();
    assert!((mean - validated).abs() < 1e-12);
}

#[test]
fn failures_still_write_an_error_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("val");
    let result = platebead(&[
        "validate", "--pattern", tmp.path().join("missing.bpat").to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(!result.status.success());
    let m = manifest(&out);
    assert!(
        m["status"].as_str().unwrap().starts_with("error"),
        "manifest status should carry the error: {}",
        m["status"]
    );
}
