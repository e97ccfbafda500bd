use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edgewalk::idx::load_idx;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_edgewalk");

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn edgewalk")
}

fn write_config(dir: &Path, name: &str, value: Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn train_moons(dir: &Path, out: &str) -> PathBuf {
    let cfg = write_config(
        dir,
        "train.json",
        serde_json::json!({
            "data": { "kind": "two_moons", "count": 1000, "noise": 0.05 },
            "holdout": 300,
            "train": { "epochs": 100, "batch_size": 16, "learning_rate": 0.1, "hidden_sizes": [16, 16] }
        }),
    );
    let out = dir.join(out);
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn train_two_moons_is_accurate_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = train_moons(tmp.path(), "a");
    let b = train_moons(tmp.path(), "b");
    let log = read_json(&a.join("train_log.json"));
    assert_eq!(log["seed"], 7);
    assert!(log["test_accuracy"].as_f64().unwrap() >= 0.97, "{log}");
    assert!(log["train_accuracy"].as_f64().unwrap() >= 0.97, "{log}");
    assert_eq!(
        fs::read(a.join("model.bin")).unwrap(),
        fs::read(b.join("model.bin")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("train_log.json")).unwrap(),
        fs::read(b.join("train_log.json")).unwrap()
    );
}

#[test]
fn train_without_seed_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "train.json",
        serde_json::json!({
            "data": { "kind": "two_moons", "count": 50, "noise": 0.05 },
            "train": { "epochs": 1, "batch_size": 8, "learning_rate": 0.1, "hidden_sizes": [4] }
        }),
    );
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "train.json",
        serde_json::json!({
            "data": { "kind": "idx", "images": "nope-images.gz", "labels": "nope-labels.gz" },
            "train": { "epochs": 1, "batch_size": 8, "learning_rate": 0.1, "hidden_sizes": [4] },
            "seed": 1
        }),
    );
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("nope-images.gz"), "{stderr}");
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_attack_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bench.json",
        serde_json::json!({
            "model": "model.bin",
            "data": { "kind": "two_moons", "count": 10, "noise": 0.05 },
            "attack": { "name": "deepfool", "iters": 20 }
        }),
    );
    let o = run(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn missing_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "quantpred",
        "--config",
        tmp.path().join("absent.json").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ifgsm_epsilon_grid_is_aggregated() {
    let tmp = TempDir::new().unwrap();
    let model_dir = train_moons(tmp.path(), "model");
    let cfg = write_config(
        tmp.path(),
        "bench.json",
        serde_json::json!({
            "model": "model/model.bin",
            "data": { "kind": "two_moons", "count": 60, "noise": 0.05 },
            "attack": { "name": "ifgsm", "epsilon": 0.1, "iters": 10 },
            "epsilons": [0.02, 0.05, 0.1, 0.2, 0.4],
            "seed": 3
        }),
    );
    assert!(model_dir.join("model.bin").exists());
    let out = tmp.path().join("bench");
    let o = run(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("report.json"));
    assert_eq!(summary["multi_epsilon"], true);
    assert_eq!(summary["attack"], "ifgsm");
    assert_eq!(summary["config"]["epsilons"].as_array().unwrap().len(), 5);

    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next(),
        Some("image_id,true_label,attack,grads_used,success,distortion_l2,distortion_linf")
    );
    assert_eq!(lines.count(), summary["n"].as_u64().unwrap() as usize);
    // every run of the grid is charged
    assert_eq!(summary["mean_grads"], 50.0);

    let oc = fs::read_to_string(out.join("oc.csv")).unwrap();
    assert!(oc.starts_with("D,P\n"));
    let last_p: f64 = oc
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(last_p, summary["p_suc"].as_f64().unwrap());
}

#[test]
fn bench_rejects_dimension_mismatch() {
    let tmp = TempDir::new().unwrap();
    train_moons(tmp.path(), "model");
    let dir = mnist_dir();
    let cfg = write_config(
        tmp.path(),
        "bench.json",
        serde_json::json!({
            "model": "model/model.bin",
            "data": {
                "kind": "idx",
                "images": dir.join("test-images-idx3-ubyte.gz"),
                "labels": dir.join("test-labels-idx1-ubyte.gz"),
                "limit": 5
            },
            "attack": { "name": "bp" }
        }),
    );
    let o = run(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn quantpred(dir: &Path, samples: usize, rhos: &[f64], n: usize) -> String {
    let cfg = write_config(
        dir,
        "quantpred.json",
        serde_json::json!({ "n": n, "delta": 1.0 / 255.0, "rhos": rhos, "samples": samples, "seed": 5 }),
    );
    let out = dir.join(format!("q{samples}"));
    let o = run(&[
        "quantpred",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(out.join("quantpred.csv")).unwrap()
}

fn column(csv: &str, row: usize, col: usize) -> f64 {
    csv.lines()
        .nth(row + 1)
        .unwrap()
        .split(',')
        .nth(col)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn quantpred_columns() {
    let tmp = TempDir::new().unwrap();
    let without = quantpred(tmp.path(), 0, &[0.5, 2.0], 100);
    assert_eq!(without.lines().next(), Some("rho,sqrt_exact,sqrt_highres"));
    assert_eq!(without.lines().count(), 3);
    let with = quantpred(tmp.path(), 200, &[0.5, 2.0], 100);
    assert_eq!(
        with.lines().next(),
        Some("rho,sqrt_exact,sqrt_highres,sqrt_mc")
    );
    let exact = column(&with, 1, 1);
    let mc = column(&with, 1, 3);
    assert!((mc - exact).abs() / exact < 0.05, "{exact} {mc}");
}

#[test]
fn quantpred_large_rho_matches_high_resolution() {
    let tmp = TempDir::new().unwrap();
    let csv = quantpred(tmp.path(), 0, &[10.0], 1000);
    let ratio = column(&csv, 0, 1) / column(&csv, 0, 2);
    assert!((0.99..=1.01).contains(&ratio), "{ratio}");
}

#[test]
fn quantpred_small_rho_on_large_images_vanishes() {
    let tmp = TempDir::new().unwrap();
    let csv = quantpred(tmp.path(), 0, &[0.05], 3 * 299 * 299);
    let exact = column(&csv, 0, 1);
    assert!(exact < 1e-3, "{exact}");
}

#[test]
fn quantpred_needs_one_rho_source() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.json",
        serde_json::json!({ "n": 10, "delta": 0.1 }),
    );
    let o = run(&[
        "quantpred",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn trace2d(dir: &Path, out: &str, attack: Value, resolution: usize) -> (Output, PathBuf) {
    let cfg = write_config(
        dir,
        &format!("{out}.json"),
        serde_json::json!({ "attack": attack, "start": [0.42, 0.52], "resolution": resolution, "seed": 0 }),
    );
    let out = dir.join(out);
    let o = run(&[
        "trace2d",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (o, out)
}

#[test]
fn trace2d_grid_covers_unit_square() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = trace2d(
        tmp.path(),
        "bp",
        serde_json::json!({ "name": "bp", "alpha": 0.2, "iters": 40 }),
        11,
    );
    let grid = fs::read_to_string(out.join("grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("y0,y1,p0,p1"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 121);
    let mut xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    for axis in [&xs, &ys] {
        assert_eq!(axis.len(), 11);
        assert_eq!(axis[0], 0.0);
        assert_eq!(axis[10], 1.0);
        assert!(axis.windows(2).all(|w| w[0] < w[1]));
    }
    for r in &rows {
        assert!((r[2] + r[3] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn trace2d_reports_path_statistics() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = trace2d(
        tmp.path(),
        "bp",
        serde_json::json!({ "name": "bp", "alpha": 0.2, "iters": 40 }),
        5,
    );
    let stats = read_json(&out.join("stats.json"));
    assert_eq!(stats["success"], true);
    assert!(stats["adversarial_fraction"].as_f64().unwrap() >= 0.7);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("crossings="), "{stdout}");

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,y0,y1,loss,adversarial"));
    assert_eq!(lines.count(), stats["iterates"].as_u64().unwrap() as usize);
}

#[test]
fn trace2d_cw_oscillates() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = trace2d(
        tmp.path(),
        "cw",
        serde_json::json!({ "name": "cw", "learning_rate": 0.1, "lambda0": 0.1, "search_steps": 1, "inner_iters": 100 }),
        5,
    );
    let stats = read_json(&out.join("stats.json"));
    assert!(stats["crossings"].as_u64().unwrap() >= 2, "{stats}");
}

#[test]
fn idx_loader_reads_bundled_subset() {
    let dir = mnist_dir();
    let test = load_idx(
        &dir.join("test-images-idx3-ubyte.gz"),
        &dir.join("test-labels-idx1-ubyte.gz"),
        Some(200),
    )
    .unwrap();
    assert_eq!(test.len(), 200);
    assert_eq!(test.dim(), Some(784));
    assert!(test.labels().iter().all(|&l| l < 10));
    assert!(test
        .images()
        .iter()
        .flatten()
        .all(|&v| (0.0..=1.0).contains(&v)));
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte.gz"),
        &dir.join("train-labels-idx1-ubyte.gz"),
        None,
    )
    .unwrap();
    assert_eq!(train.len(), 4000);
}
