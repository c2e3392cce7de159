//! End-to-end runs of the binary against golden output files.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the files from the current binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dirichlet-lab"));
    c.env_remove("DIRICHLET_LAB_BUDGET");
    c
}

fn here(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn check_golden(name: &str, out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(0),
        "{name}: stderr was {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let actual = String::from_utf8(out.stdout.clone()).expect("utf-8 output");
    assert!(!actual.contains('\r'), "{name}: CR in output");
    let path = here(&format!("golden/{name}"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden");
}

#[test]
fn trajectory_half() {
    let out = run(&["trajectory", "--A", "0.5", "--m", "1", "--n", "1", "--weights", "1,1", "--norm", "sup", "--s", "0:12:0.25"]);
    check_golden("trajectory_half.csv", &out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"norm\":\"sup\""), "resolved config is logged");
}

#[test]
fn dirichlet_golden_ratio_euclid() {
    let a = here("data/phi.json");
    let out = run(&["dirichlet", "--A", a.to_str().unwrap(), "--psi", "c/t:1.0", "--norm", "euclid", "--tgrid", "geom:2:1000:64"]);
    check_golden("dirichlet_phi_euclid.jsonl", &out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 65);
    assert!(text.lines().last().unwrap().contains("\"summary\":\"all-solvable\""));
}

#[test]
fn ba_score_golden_ratio() {
    let out = run(&["ba-score", "--A", "1.618033988749895", "--Q", "10000"]);
    check_golden("ba_score_phi.json", &out);
}

#[test]
fn locus_hajos() {
    let out = run(&["locus", "--kind", "hajos:3:2,0,1", "--count", "3", "--seed", "42"]);
    check_golden("locus_hajos3.jsonl", &out);
}

#[test]
fn locus_hexagonal() {
    let out = run(&["locus", "--kind", "hex", "--seed", "5"]);
    check_golden("locus_hex.jsonl", &out);
}

#[test]
fn experiment_ba_in_di() {
    let cfg = here("data/ba_in_di.json");
    let out = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    check_golden("experiment_ba_in_di.json", &out);
}

#[test]
fn experiment_csv_to_file() {
    let cfg = here("data/di_measure.json");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap().replace(path.to_str().unwrap(), "OUT");
    let golden = Output {
        status: out.status,
        stdout: text.into_bytes(),
        stderr: vec![],
    };
    check_golden("experiment_di_measure.csv", &golden);
}

#[test]
fn critical_radius_euclid_2() {
    let out = run(&["critical-radius", "--norm", "euclid", "--d", "2"]);
    check_golden("critical_radius_euclid2.txt", &out);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("1.0745699"));
}

#[test]
fn config_overlay_lets_flags_win() {
    let cfg = here("data/trajectory_defaults.json");
    let from_file = run(&["trajectory", "--config", cfg.to_str().unwrap(), "--probe", "0.5"]);
    assert_eq!(from_file.status.code(), Some(0));
    let explicit = run(&["trajectory", "--A", "0.5", "--norm", "euclid", "--s", "0:1:0.5", "--probe", "0.5"]);
    assert_eq!(from_file.stdout, explicit.stdout);
    let overridden = run(&["trajectory", "--config", cfg.to_str().unwrap(), "--norm", "sup", "--probe", "0.5"]);
    let sup = run(&["trajectory", "--A", "0.5", "--norm", "sup", "--s", "0:1:0.5", "--probe", "0.5"]);
    assert_eq!(overridden.stdout, sup.stdout);
    assert_ne!(overridden.stdout, from_file.stdout);
}

#[test]
fn jobs_do_not_change_output() {
    let args = ["trajectory", "--A", "0.3819;0.1", "--m", "2", "--n", "1", "--s", "0:6:0.5"];
    let one = bin().args(args).args(["--jobs", "1"]).output().unwrap();
    let four = bin().args(args).args(["--jobs", "4"]).output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["trajectory", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["trajectory"]).status.code(), Some(64), "missing --A");
    assert_eq!(run(&["locus", "--kind", "hex"]).status.code(), Some(64), "missing --seed");
    assert_eq!(run(&["critical-radius", "--norm", "lp:3", "--d", "2"]).status.code(), Some(64), "estimate needs --seed");
    assert_eq!(run(&["critical-radius", "--norm", "lp:0.5", "--d", "2"]).status.code(), Some(1));
    assert_eq!(run(&["dirichlet", "--A", "0.5", "--tgrid", "list:0.5,2"]).status.code(), Some(1));
    assert_eq!(run(&["ba-score", "--A", "0.1,0.2", "--Q", "1e9", "--budget", "1000"]).status.code(), Some(2));
    let budget = bin()
        .args(["dirichlet", "--A", "0.3", "--tgrid", "list:2,3"])
        .env("DIRICHLET_LAB_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(budget.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&budget.stdout).lines().count(), 3, "partial output is still written");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
