//! The full acceptance suite: criteria 1 to 15 in-process, then criterion 16
//! by running `fracgrad selftest` twice and comparing the CSV bytes.

use std::process::Command;

use fracgrad::acceptance::{self, Outcome};

const SEED: u64 = 20240607;

fn selftest_csv(dir: &std::path::Path, name: &str) -> Vec<u8> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_fracgrad"))
        .args(["selftest", "--seed", &SEED.to_string(), "--out"])
        .arg(&out)
        .output()
        .expect("selftest runs");
    assert!(status.status.code().is_some(), "selftest was killed");
    std::fs::read(&out).unwrap_or_default()
}

fn main() {
    let mut outcomes: Vec<Outcome> = acceptance::run_all(SEED);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let dir = tempfile::tempdir().unwrap();
    let first = selftest_csv(dir.path(), "first.csv");
    let second = selftest_csv(dir.path(), "second.csv");
    let det = acceptance::determinism(&first, &second);
    println!("{}", det.line());
    outcomes.push(det);
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass()).map(|o| o.id).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
