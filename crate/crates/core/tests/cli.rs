//! End-to-end runs of the `flagsim` binary on the shipped example data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn flagsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flagsim")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(flagsim(&["--help"]).status.code(), Some(0));
    assert_eq!(flagsim(&["simulate", "--help"]).status.code(), Some(0));
    assert_eq!(flagsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(flagsim(&["check", "--suite", "nonsense"]).status.code(), Some(1));
    assert_eq!(flagsim(&["check", "--nv", "100"]).status.code(), Some(1));
    assert_eq!(flagsim(&["invariants", "--flag", "/nonexistent/flag.json"]).status.code(), Some(1));
}

#[test]
fn invariants_of_the_pointed_loop() {
    let out = flagsim(&["invariants", "--flag", arg(&data("pointed_loop.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["dimension"], 2);
    assert_eq!(v["nesting_residual"], 0.0);
    let area = v["enclosed_area"].as_f64().unwrap();
    assert_eq!(v["action_integrals"]["loop"].as_f64().unwrap(), area);
    assert_eq!(v["mass_signature"]["levels"][0].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_writes_identical_artifacts_twice() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = vec![];
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.json"));
        let status = flagsim(&["simulate", "--scenario", arg(&data("scenario_pointed_loop.json")), "--out", arg(&out)]);
        assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
        let csv = fs::read(out.with_extension("csv")).unwrap();
        runs.push((fs::read(&out).unwrap(), csv));
    }
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0].1.clone()).unwrap();
    assert!(csv.starts_with("t,level,index,x_1,x_2,density\n"));
    let diag: serde_json::Value = serde_json::from_slice(&runs[0].0).unwrap();
    for d in diag["drift"].as_array().unwrap() {
        let name = d["name"].as_str().unwrap();
        if name.starts_with("mass[") || name == "nesting_residual" {
            assert_eq!(d["relative_drift"], 0.0, "{name}");
        }
    }
}

#[test]
fn simulate_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short.json");
    let trajectory = dir.path().join("traj.csv");
    let status = flagsim(&[
        "simulate",
        "--scenario",
        arg(&data("scenario_torus.json")),
        "--t",
        "0.01",
        "--dt",
        "0.005",
        "--scheme",
        "rk4",
        "--record-every",
        "1",
        "--trajectory",
        arg(&trajectory),
        "--out",
        arg(&out),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let diag: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(diag["steps"], 2);
    let csv = fs::read_to_string(trajectory).unwrap();
    // three frames of a 16 x 16 torus grid
    assert_eq!(csv.lines().count(), 1 + 3 * 256);
}

#[test]
fn classify_matches_known_orbits() {
    let necklaces =
        flagsim(&["classify", "--a", arg(&data("necklace_a.json")), "--b", arg(&data("necklace_b.json")), "--group", "dihedral"]);
    assert_eq!(necklaces.status.code(), Some(0));
    assert_eq!(stdout_json(&necklaces)["same_orbit"], true);

    let periods =
        flagsim(&["classify", "--a", arg(&data("periods_a.json")), "--b", arg(&data("periods_b.json")), "--group", "sl2z"]);
    let v = stdout_json(&periods);
    assert_eq!(v["same_orbit"], true);
    let w = &v["witness"];
    let m = |i: usize, j: usize| w[i][j].as_i64().unwrap();
    assert_eq!(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0), 1);
    assert_eq!((2 * m(0, 0) + 3 * m(0, 1), 2 * m(1, 0) + 3 * m(1, 1)), (1, 1));

    let distinct =
        flagsim(&["classify", "--a", arg(&data("periods_a.json")), "--b", arg(&data("periods_c.json")), "--group", "sl2z"]);
    assert_eq!(stdout_json(&distinct)["same_orbit"], false);
}

#[test]
fn moser_accepts_equal_and_rejects_unequal_masses() {
    let ok = flagsim(&["moser", "--source", arg(&data("mu.json")), "--target", arg(&data("nu.json"))]);
    assert_eq!(ok.status.code(), Some(0));
    let v = stdout_json(&ok);
    assert!(v["max_pushforward_error"].as_f64().unwrap() < 5e-4);
    let targets = v["targets"].as_array().unwrap();
    for m in v["marked"].as_array().unwrap() {
        let i = m.as_u64().unwrap() as usize;
        let theta = i as f64 * std::f64::consts::TAU / 256.0;
        assert_eq!(targets[i].as_f64().unwrap(), theta);
    }

    let bad = flagsim(&["moser", "--source", arg(&data("mu.json")), "--target", arg(&data("nu_unequal.json"))]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("differs from target mass"));
}

#[test]
fn pair_and_separate() {
    let loop_flag = data("pointed_loop.json");
    let pair = flagsim(&["pair", "--flag", arg(&loop_flag), "--test", arg(&data("gentle_hamiltonian.json"))]);
    assert!(stdout_json(&pair)["value"].as_f64().unwrap().is_finite());

    let found = flagsim(&["separate", "--a", arg(&loop_flag), "--b", arg(&data("pointed_loop_heavier.json"))]);
    let v = stdout_json(&found);
    assert_eq!(v["found"], true);
    assert!(v["gap"].as_f64().unwrap() > 1e-6);

    let none = flagsim(&["separate", "--a", arg(&loop_flag), "--b", arg(&loop_flag)]);
    assert_eq!(stdout_json(&none)["found"], false);
}

#[test]
fn check_passes_on_shipped_scenarios_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = vec![];
    for k in 0..2 {
        let out = dir.path().join(format!("report{k}.json"));
        let run = flagsim(&[
            "check",
            "--suite",
            "all",
            "--seeds",
            "0..9",
            "--scenarios",
            arg(&data("scenario_pointed_loop.json")),
            arg(&data("scenario_torus.json")),
            "--out",
            arg(&out),
        ]);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
        reports.push(fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 9);
    assert_eq!(v["scenarios"].as_array().unwrap().len(), 2);
}

#[test]
fn failing_scenario_gives_suite_failure_exit() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("coarse.json");
    let text = format!(
        r#"{{"flag": "{}", "hamiltonian": {{"poly": [{{"exponents": [2, 0], "coeff": 5.0}}], "bumps": []}}, "t": 1.0, "dt": 0.5}}"#,
        arg(&data("pointed_loop.json"))
    );
    fs::write(&scenario, text).unwrap();
    let run = flagsim(&["check", "--suite", "homology", "--seeds", "0..1", "--scenarios", arg(&scenario)]);
    assert_eq!(run.status.code(), Some(2), "{}", String::from_utf8_lossy(&run.stderr));
    let v = stdout_json(&run);
    assert_eq!(v["passed"], false);
    assert!(v["scenarios"][0]["failure"].as_str().unwrap().contains("exceeds limit"));
}
