use std::process::{Command, Output};

use serde_json::json;

fn fracgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracgrad")).args(args).output().expect("binary runs")
}

fn data_rows(stdout: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn constants_table_has_requested_rows() {
    let out = fracgrad(&["constants", "--n", "2", "--s-grid", "0.5:0.999:10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("# version: "));
    assert!(text.contains("# config_sha256: "));
    assert_eq!(data_rows(&out.stdout).len(), 10);
}

#[test]
fn exit_codes() {
    let out = fracgrad(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(fracgrad(&["constants", "--n", "9", "--s-grid", "0.5:0.9:2"]).status.code(), Some(2));
    assert_eq!(fracgrad(&["constants", "--n", "2", "--s-grid", "0.5:0.9"]).status.code(), Some(2));
    assert_eq!(fracgrad(&["gamma", "--config", "missing.json"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 1,").unwrap();
    assert_eq!(fracgrad(&["gamma", "--config", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn gamma_writes_tables_and_minimizers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gamma.json");
    let config = json!({
        "n": 1, "N": 64, "L": 16.0,
        "W": {"kind": "convex-quadratic"},
        "omega": {"type": "ball", "r": 4.0},
        "f": {"spec": "bump", "radius": 3.0},
        "s_grid": [0.8, "local"],
        "tol": 1e-8, "max_iter": 5000, "continuation": true
    });
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = dir.path().join("run.csv");
    let status = fracgrad(&["gamma", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.contains("s,energy,dist_to_local,converged,iters"));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.csv.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"], config);
    assert!(dir.path().join("run.recovery.csv").exists());
    for s in ["0.8", "local"] {
        let field = dir.path().join(format!("run.minimizer-s{s}.bin"));
        let u: fracgrad::grid::VectorField = fracgrad::io::load_field(&field).unwrap();
        assert_eq!(u.components().len(), 1);
    }

    let mut capped = config.clone();
    capped["max_iter"] = json!(2);
    std::fs::write(&cfg, capped.to_string()).unwrap();
    assert_eq!(fracgrad(&["gamma", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn experiments_run_and_are_deterministic() {
    let a = fracgrad(&["localize", "--spec", "gaussian", "--n", "2", "--N", "64", "--L", "16", "--s", "0.5,0.9"]);
    let b = fracgrad(&["--threads", "1", "localize", "--spec", "gaussian", "--n", "2", "--N", "64", "--L", "16", "--s", "0.5,0.9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(data_rows(&a.stdout).len(), 2);

    let out = fracgrad(&["crosscheck", "--spec", "bump", "--n", "1", "--N", "128", "--s", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&out.stdout);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("direct,"));
    assert_eq!(fracgrad(&["crosscheck", "--paths", "fmm"]).status.code(), Some(2));

    let minors = fracgrad(&["minors", "--N", "64", "--s", "0.9"]);
    assert_eq!(minors.status.code(), Some(0));
    assert_eq!(data_rows(&minors.stdout).len(), 12);
}

#[test]
fn inequalities_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ineq.json");
    let config = json!({
        "n": 1, "N": 128, "L": 16.0,
        "specs": [{"spec": "bump", "radius": 3.0}, {"spec": "gaussian", "sigma": 1.0}],
        "s_grid": [0.5, 0.9], "p": 2.0,
        "omega": {"type": "ball", "r": 6.0}
    });
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = fracgrad(&["inequalities", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&out.stdout).len(), 4);
}

#[test]
fn shipped_configs_build() {
    use fracgrad::config::{load, GammaConfig, InequalityConfig};
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["gamma-quadratic.json", "gamma-polyconvex.json"] {
        let (cfg, _): (GammaConfig, serde_json::Value) = load(&dir.join(name)).unwrap();
        cfg.build().unwrap();
    }
    let (cfg, _): (InequalityConfig, serde_json::Value) = load(&dir.join("inequalities.json")).unwrap();
    cfg.mask().unwrap();
}
