use std::path::Path;
use std::process::{Command, Output};

fn nls_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nls-lab")).args(args).output().expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn selftest_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = nls_lab(&["selftest", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("selftest.json").exists());
    assert_eq!(manifest(dir.path())["summary"]["passed"], true);
}

#[test]
fn counting_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "lambdas = [1, 2]\nn1_list = [8, 16]\n").unwrap();
    let out = nls_lab(&["counting", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("counting.csv")).unwrap();
    assert!(csv.starts_with("lambda,n1,n2,w,count,bound,ratio,k,tau"));
    // N₂ ∈ {1, 2} for N₁ = 8 and {1, 2, 4} for N₁ = 16, per period
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    assert_eq!(manifest(dir.path())["command"], "counting");
}

#[test]
fn empty_grid_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "constant = \"one_d\"\nlambdas = []\nn1_list = [8]\n").unwrap();
    let out = nls_lab(&["bilinear", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("bilinear.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn outputs_are_deterministic_per_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("b.toml");
        std::fs::write(&cfg, "constant = \"one_d\"\nlambdas = [2]\nn1_list = [8, 16]\ntrials = 2\n").unwrap();
        let out = nls_lab(&["bilinear", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
        std::fs::read_to_string(dir.path().join("bilinear.csv")).unwrap()
    };
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}

#[test]
fn simulate_records_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "dim = 1\nlambda = 2\nm = 32\ndt = 1e-3\nt_end = 0.016\ndealias = false\nframes = 4\n").unwrap();
    let out = nls_lab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("simulation.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let mass_drift: f64 = rows[4][8].parse().unwrap();
    assert!(mass_drift < 1e-12);
}

#[test]
fn drift_run_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.toml");
    std::fs::write(
        &cfg,
        "name = \"tiny\"\ndim = 1\ns = 0.45\nn_list = [2, 4, 8]\nlambda = { rule = \"explicit\", values = [1.0] }\n\
         m = 8\ndt = 1e-3\nt_end = 0.004\nseeds = [1]\nl2 = 0.5\ncheckpoints = 2\n",
    )
    .unwrap();
    let out = nls_lab(&["drift1d", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
    assert!(manifest(dir.path())["summary"]["slope"].is_object());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "constant = \"one_d\"\nlambdas = [0.5]\nn1_list = [8]\n").unwrap();
    let out = nls_lab(&["bilinear", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambdas"));
}

#[test]
fn simulation_requires_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = nls_lab(&["simulate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}
