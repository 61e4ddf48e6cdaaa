use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scoutsim::scenarios;
use scoutsim::transport::Protocol;
use scoutsim::SimTime;

fn scoutsim(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scoutsim"))
        .args(args)
        .env("SCOUTSIM_OUTPUT", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn scenario_list_prints_every_name() {
    let tmp = tempfile::tempdir().unwrap();
    let o = scoutsim(tmp.path(), &["scenario", "list"]);
    assert!(o.status.success());
    let listed: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(listed, scenarios::NAMES);
}

#[test]
fn run_writes_artifacts_under_the_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::five_flows_sequence(Protocol::Dctcp, SimTime::from_millis(2));
    cfg.name = "cli-run".into();
    let path = tmp.path().join("cli-run.toml");
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();

    let o = scoutsim(tmp.path(), &["run", path.to_str().unwrap(), "seed=5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("cli-run");
    assert!(dir.join("queue.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["protocol"], "dctcp");

    let o = scoutsim(tmp.path(), &["run", path.to_str().unwrap(), "--summary-only", "name=\"cli-brief\""]);
    assert!(o.status.success(), "{}", stderr(&o));
    let brief = tmp.path().join("cli-brief");
    assert!(brief.join("summary.json").exists());
    assert!(!brief.join("queue.csv").exists());
}

#[test]
fn scenario_runs_apply_overrides_to_every_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = scoutsim(tmp.path(), &["scenario", "five-flows-sequence", "--summary-only", "duration_ns=3000000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dirs: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!dirs.is_empty());
    for d in dirs {
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["end_ns"], 3_000_000, "{}", d.display());
    }
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "duration_ns = 0\n").unwrap();
    for args in [
        vec!["run", bad.to_str().unwrap()],
        vec!["run", tmp.path().join("missing.toml").to_str().unwrap()],
        vec!["scenario", "no-such-scenario"],
        vec!["scenario", "early-loss", "dwtcp.beta=-1"],
    ] {
        let o = scoutsim(tmp.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error["), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn event_budget_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = scoutsim(
        tmp.path(),
        &["scenario", "five-flows-sequence", "--summary-only", "max_events=10000"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[event-budget]"));
}

#[test]
fn fluid_sweep_and_params_write_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = scoutsim(tmp.path(), &["fluid", "sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = fs::read_to_string(tmp.path().join("fluid-sweep/sweep.csv")).unwrap();
    assert_eq!(
        sweep.lines().next().unwrap(),
        "beta,k_bar,BDP,N,classification,re_lambda,im_lambda,bound_2bdp_sqrtbeta"
    );
    assert!(sweep.lines().count() > 200);

    let spec = tmp.path().join("traj.toml");
    fs::write(&spec, "k_bar = 50.0\nhorizon_taus = 500.0\n").unwrap();
    let out = tmp.path().join("traj");
    let o = scoutsim(tmp.path(), &["fluid", "params", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("equilibrium"));
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn fluid_with_zero_flows_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("zero.toml");
    fs::write(&spec, "n = 0.0\n").unwrap();
    let o = scoutsim(tmp.path(), &["fluid", "params", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[fluid]"));

    fs::write(&spec, "unknown_key = 1\n").unwrap();
    let o = scoutsim(tmp.path(), &["fluid", "params", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
