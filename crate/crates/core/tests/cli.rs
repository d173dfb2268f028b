use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nhsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = \"sphere_on_sphere\"\nmode = \"closed_loop\"\nT = 0.5\nh = 1e-2\n",
    );
    let out = dir.path().join("out");
    let o = nhsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "trajectory.json", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "sphere_on_sphere");
    assert_eq!(summary["mode"], "closed_loop");
    assert_eq!(summary["scheme"], "RKMK4");
    assert_eq!(summary["steps"], 50);
    assert_eq!(summary["config"]["parameters"]["J3"], 3.0);
    assert_eq!(summary["within_budgets"], true);
    assert!(summary.get("wall_time").is_none());
}

#[test]
fn set_overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"sphere_on_sphere\"\nT = 0.1\nh = 1e-2\n");
    let out = dir.path().join("out");
    let o = nhsim(&[
        "simulate",
        "--config",
        &cfg,
        "--set",
        "parameters.J2=5",
        "--set",
        "formats=[\"json\"]",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("trajectory.csv").exists());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["parameters"]["J2"], 5.0);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        "scenario = \"se3_r3\"\nT = 0.1\nh = 0.5\n",
        "scenario = \"nowhere\"\n",
        "scenario = \"se3_r3\"\nmode = \"closed_loop\"\n",
        "scenario = \"se3_r3\"\nspeed = 3\n",
        "scenario = \"sphere_on_sphere\"\n[parameters]\nJ1 = -1.0\n",
    ];
    for text in cases {
        let cfg = write_config(dir.path(), text);
        let o = nhsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{text}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = nhsim(&["verify", "--scenario", "nowhere", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_mode_fails_on_budget_violation() {
    let dir = tempfile::tempdir().unwrap();
    // coarse steps push the diagnostics past their budgets
    let cfg = write_config(
        dir.path(),
        "scenario = \"blade_on_sphere\"\nmode = \"closed_loop\"\nT = 20.0\nh = 0.5\n[initial]\nxi = [0.0, 3.0, 0.0, 4.0]\n",
    );
    let out = dir.path().join("out");
    let lenient = nhsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(lenient.status.success(), "{}", String::from_utf8_lossy(&lenient.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["within_budgets"], false, "{summary}");
    let strict = nhsim(&["simulate", "--config", &cfg, "--strict", "--out", out.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn verify_reports_every_property() {
    let dir = tempfile::tempdir().unwrap();
    let o = nhsim(&[
        "verify",
        "--scenario",
        "blade_on_sphere",
        "--samples",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("verification.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], 42);
    let names: Vec<&str> = report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"closed-form control agreement"));
    assert!(names.contains(&"Jacobi identity"));
}

#[test]
fn list_scenarios_prints_json() {
    let o = nhsim(&["list-scenarios"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}
