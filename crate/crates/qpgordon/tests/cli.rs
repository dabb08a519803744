use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qpgordon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpgordon"))
        .current_dir(dir)
        .env_remove("QPGORDON_PRECISION_BITS")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn liouville_config(dir: &Path, k_list: &str) -> String {
    let text = format!(
        "frequency = \"liouville:beta=1.5,depth=3,budget=10000\"\n\
         potential = \"cos:lambda=4\"\n\
         depth = 3\n\
         phases = [\"0.15\"]\n\
         energies = {{ box_mid_k = 2 }}\n\
         seed = 1\n\
         [gordon]\n\
         k_list = {k_list}\n"
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn every_subcommand_writes_outputs_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 7] = [
        ("contfrac", &["contfrac.csv", "contfrac.json"]),
        ("discrepancy", &["discrepancy.csv"]),
        ("variation", &["variation.csv", "log_variation.csv", "variation.json"]),
        ("lyapunov", &["lyapunov.csv"]),
        ("uniform-bound", &["uniform_bound_chain.csv", "uniform_bound_profile.csv", "uniform_bound.json"]),
        ("spectrum", &["eigenvalues.csv"]),
        ("regime-scan", &["regime_scan.csv"]),
    ];
    for (cmd, files) in cases {
        let out_dir = dir.path().join(cmd);
        let out = qpgordon(
            dir.path(),
            &["--output-dir", out_dir.to_str().unwrap(), "--energy", "0", "--energy", "1", cmd],
        );
        assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files {
            assert!(out_dir.join(f).is_file(), "{cmd} did not write {f}");
        }
        let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], cmd);
        assert_eq!(manifest["exit_code"], 0);
        assert_eq!(manifest["precision_bits"], 256);
        assert_eq!(manifest["outputs"].as_array().unwrap().len(), files.len());
    }
}

#[test]
fn csv_headers_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpgordon(dir.path(), &["--output-dir", "o", "contfrac"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("o/contfrac.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,a_k,p_k,q_k,log_q_next_over_q");
    assert_eq!(text.lines().nth(1).unwrap(), "0,0,0,1,");
    assert!(text.lines().nth(2).unwrap().starts_with("1,1,1,1,0.693"));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/contfrac.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn gordon_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let satisfied = liouville_config(dir.path(), "[2]");
    let out = qpgordon(dir.path(), &["--config", &satisfied, "--output-dir", "ok", "gordon-check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("ok/gordon_summary.csv")).unwrap();
    assert!(summary.contains("CRITERION_SATISFIED"), "{summary}");

    let small = liouville_config(dir.path(), "[1, 2]");
    let out = qpgordon(dir.path(), &["--config", &small, "--output-dir", "small", "gordon-check"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn golden_frequency_fails_the_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = liouville_config(dir.path(), "[5, 8]");
    let out = qpgordon(
        dir.path(),
        &["--config", &cfg, "--alpha", "surd:(sqrt(5)-1)/2", "--depth", "200", "--energy", "0.0858", "--output-dir", "g", "gordon-check"],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g/gordon_report.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "gordon_report");
}

#[test]
fn singular_orbit_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpgordon(dir.path(), &["--output-dir", "o", "--potential", "maryland:lambda=1", "--phase", "1/2", "gordon-check"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qpgordon(dir.path(), &["--output-dir", "o", "--potential", "cos:lambda=x", "lyapunov"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cos:lambda=x") && err.contains('^'), "{err}");

    assert_eq!(code(&qpgordon(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&qpgordon(dir.path(), &["--config", "missing.toml", "contfrac"])), 1);
    assert_eq!(code(&qpgordon(dir.path(), &["--depth", "20", "--output-dir", "o", "discrepancy"])), 1);
    assert_eq!(code(&qpgordon(dir.path(), &["--help"])), 0);
}

#[test]
fn precision_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qpgordon"))
        .current_dir(dir.path())
        .env("QPGORDON_PRECISION_BITS", "320")
        .args(["--output-dir", "o", "contfrac"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["precision_bits"], 320);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for (name, jobs) in [("a", "1"), ("b", "3")] {
        let out = qpgordon(dir.path(), &["--output-dir", name, "--seed", "5", "--jobs", jobs, "discrepancy"]);
        assert_eq!(code(&out), 0);
    }
    let a = fs::read(dir.path().join("a/discrepancy.csv")).unwrap();
    let b = fs::read(dir.path().join("b/discrepancy.csv")).unwrap();
    assert_eq!(a, b);
}
