use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flyqubit")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn protocol_replay_reaches_its_target() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["entangle_a", "entangle_b", "timebin_a", "timebin_b", "timebin_entangle_a"] {
        let o = run(dir.path(), &["protocol", "--which", id, "--alpha0", "0.6", "--beta0", "0,0.8", "--check"]);
        assert_eq!(code(&o), 0, "{id}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(format!("protocol_{id}.json"))).unwrap()).unwrap();
        assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn unknown_protocol_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["protocol", "--which", "teleport"])), 1);
}

#[test]
fn bad_parameter_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"g_GHz": -1.0, "kappa_GHz": 30.0, "gamma_GHz": 0.1}"#).unwrap();
    let o = run(dir.path(), &["--params", params.to_str().unwrap(), "bound"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(&params, "not json").unwrap();
    assert_eq!(code(&run(dir.path(), &["--params", params.to_str().unwrap(), "bound"])), 1);
}

#[test]
fn bound_files_carry_provenance_and_rerun_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["bound", "--samples", "31", "--check"];
    assert_eq!(code(&run(a.path(), &args)), 0);
    assert_eq!(code(&run(b.path(), &args)), 0);
    for name in ["bound.json", "bounds_sweep.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.path().join("bounds_sweep.csv")).unwrap();
    assert!(csv.starts_with("# artifact:"));
    assert!(csv.lines().any(|l| l.starts_with("# generator: flyqubit")));
    let data = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data, 1 + 6 * 31);
}

#[test]
fn single_coefficient_optimum_passes_its_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["optimize", "--L", "1", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["E_max"].as_f64().unwrap() - 0.988).abs() < 1e-3);
    assert!(dir.path().join("pulse_L1_free.csv").exists());
}

#[test]
fn trajectory_summary_reports_mode_matching() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["trajectory", "--s", "0.9", "--samples", "101", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mode_matching_residual"].as_f64().unwrap() < 1e-10);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 102);
}

#[test]
fn efficiency_above_the_bound_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["trajectory", "--E", "0.999"])), 2);
}

#[test]
fn verify_closes_the_loop_without_incoherent_decay() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"g_GHz": 6.0, "kappa_GHz": 30.0}"#).unwrap();
    let o = run(dir.path(), &["--params", params.to_str().unwrap(), "verify", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["cases"].as_array().unwrap().len(), 3);
}

#[test]
fn figures_check_passes_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = run(a.path(), &["figures", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(b.path(), &["figures"])), 0);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 20);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}
