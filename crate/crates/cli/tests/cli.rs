use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tomoforge::coupled::CoupledConfig;
use tomoforge::json::MatrixJson;
use tomoforge::rng::stream;
use tomoforge::DensityMatrix;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomoforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Runs with `--out path` appended; returns the file contents.
fn run_to(args: &[&str], path: &Path) -> Value {
    let mut full = args.to_vec();
    full.extend(["--out", path.to_str().unwrap()]);
    let out = run(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    read(path)
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn finite_reconstruction_example() {
    let v = run_ok(&["tomo", "reconstruct", "--n", "3", "--protocol", "finite", "--state", "random", "--seed", "7"]);
    assert_eq!(v["schema"], 1);
    assert!(v["trace_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["reconstruction"]["queries"], 7);
}

#[test]
fn pure_weights_have_no_ambiguity() {
    let v = run_ok(&["ambiguity", "--weights", "1,0"]);
    assert_eq!(v["delta"].as_f64(), Some(0.0));
}

#[test]
fn qubit_ambiguity_matches_closed_form() {
    let v = run_ok(&["ambiguity", "--weights", "0.3,0.7", "--budget", "10000"]);
    let delta = v["delta"].as_f64().unwrap();
    assert!((delta - 2.0 * 0.21f64.sqrt()).abs() < 1e-3);
    assert_eq!(v["pair"].as_array().unwrap().len(), 2);
}

#[test]
fn output_is_byte_identical_for_a_fixed_seed() {
    let args = ["tomo", "reconstruct", "--n", "2", "--protocol", "mc", "--samples", "3000", "--seed", "11"];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_tomoforge"))
        .args(args)
        .env("TOMOFORGE_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["basis", "--n", "2", "--frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["nosuch"]).status.code(), Some(64));
    assert_eq!(run(&["ambiguity", "--weights", "1,0", "--format", "csv"]).status.code(), Some(64));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_tomoforge"))
        .args(["basis", "--n", "2"])
        .env("TOMOFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn validation_failure_reports_json_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.json");
    let out = run(&["ambiguity", "--weights", "0.2,0.2", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["schema"], 1);
    assert_eq!(err["error"]["kind"], "invalid-input");
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unreadable_input_exits_66() {
    let out = run(&["stochastic", "decompose", "--in", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(66));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io-read");
}

#[test]
fn malformed_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["stochastic", "decompose", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "json");
}

#[test]
fn basis_export_labels_generators() {
    let v = run_ok(&["basis", "--n", "3"]);
    let gens = v["generators"].as_array().unwrap();
    assert_eq!(gens.len(), 8);
    let cartan = gens.iter().filter(|g| g["kind"] == "cartan").count();
    assert_eq!(cartan, 2);
    assert_eq!(gens[0]["index"], 1);
}

#[test]
fn measure_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.json");
    let file = run_to(&["tomo", "measure", "--n", "4", "--seed", "5"], &records);
    assert_eq!(file["records"].as_array().unwrap().len(), 1 + 4 * 3);
    let v = run_ok(&["tomo", "reconstruct", "--records", records.to_str().unwrap()]);
    let got = v["reconstruction"]["matrix"].clone();
    let want = file["state"].clone();
    for key in ["re", "im"] {
        for (a, b) in got[key].as_array().unwrap().iter().zip(want[key].as_array().unwrap()) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn stochastic_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let frame = dir.path().join("frame.json");
    let frame = run_to(&["stochastic", "from-unitary", "--n", "4", "--seed", "2"], &frame);
    let t = dir.path().join("t.json");
    std::fs::write(&t, frame["matrix"].to_string()).unwrap();
    let v = run_ok(&["stochastic", "decompose", "--in", t.to_str().unwrap()]);
    let terms = v["terms"].as_array().unwrap();
    assert!(!terms.is_empty() && terms.len() <= 10);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    let total: f64 = terms.iter().map(|t| t["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

fn coupled_input(zero: bool) -> Value {
    let mut rng = stream(77, 0);
    let configs: Vec<Value> = (0..4)
        .map(|_| {
            let mut c = CoupledConfig::random(2, 2, &mut rng);
            if zero {
                c.couplings.fill(0.0);
            }
            serde_json::to_value(c.to_json()).unwrap()
        })
        .collect();
    let rho_s = DensityMatrix::random(2, &mut rng);
    let rho_m = DensityMatrix::random(2, &mut rng);
    json!({
        "configs": configs,
        "rho_m": MatrixJson::from(rho_m.matrix()),
        "rho_s": MatrixJson::from(rho_s.matrix()),
    })
}

#[test]
fn coupled_recovery_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coupled.json");
    std::fs::write(&path, coupled_input(false).to_string()).unwrap();
    let v = run_ok(&["coupled", "--in", path.to_str().unwrap()]);
    assert_eq!(v["rank"], 3);
    assert!(v["trace_error"].as_f64().unwrap() <= 1e-8);
    for key in ["rho_S", "residual", "condition"] {
        assert!(!v[key].is_null(), "{key}");
    }
}

#[test]
fn uncoupled_config_is_under_determined() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coupled.json");
    std::fs::write(&path, coupled_input(true).to_string()).unwrap();
    let out = run(&["coupled", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "under-determined");
    assert_eq!(err["error"]["rank"], 0);
    let partial = run_ok(&["coupled", "--in", path.to_str().unwrap(), "--partial"]);
    assert!(partial["rho_S"].is_null());
}

#[test]
fn circle_json_and_csv() {
    let v = run_ok(&[
        "circle", "--profile", "bump", "--lambda0", "0.8", "--T", "5", "--n", "3", "--h", "1e-3", "--t-end", "15",
        "--stride", "100",
    ]);
    assert_eq!(v["recovery"]["integer"], 3);
    assert_eq!(v["trajectory"]["t"].as_array().unwrap().len(), 151);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = run(&[
        "circle", "--n", "-2", "--t-end", "10", "--stride", "50", "--format", "csv", "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u1,u2,u_par,B"));
    assert_eq!(lines.count(), 201);
}

#[test]
fn circle_mixture_mean() {
    let v = run_ok(&["circle", "--mixture", "-1:0.5,3:0.5"]);
    assert!((v["recovery"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn entropy_examples() {
    let rn = run_ok(&["entropy", "rn", "--p", "1.5", "--grid", "4096", "--L", "20", "--fn", "gaussian"]);
    let sum = rn["S_x"].as_f64().unwrap() + rn["S_p"].as_f64().unwrap();
    assert!((sum - rn["bound"].as_f64().unwrap()).abs() < 1e-6);
    assert!(rn["hy_slack"].as_f64().unwrap() >= -1e-7);

    let circle = run_ok(&["entropy", "circle", "--fn", "two-mode"]);
    assert!((circle["S_p"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);

    let su2 = run_ok(&["entropy", "su2", "--fn", "random", "--jmax", "1.5", "--seed", "4"]);
    assert!(su2["slack"].as_f64().unwrap() >= -1e-6);
    assert_eq!(run(&["entropy", "su2", "--jmax", "0.7"]).status.code(), Some(2));
    assert_eq!(run(&["entropy", "rn", "--fn", "nosuch"]).status.code(), Some(64));
}

#[test]
fn selftest_passes_on_a_clean_build() {
    let v = run_ok(&["selftest"]);
    assert_eq!(v["passed"], true);
    assert!(v["errors"].as_array().unwrap().is_empty());
}
