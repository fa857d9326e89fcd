use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curbflow"))
}

fn mission() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/mission/scenario.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn invert_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "invert", "--k", "2", "--mu", "1", "--u", "0.4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "y = 1.000000\n");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("invert.json")).unwrap()).unwrap();
    assert!((v["y"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = run(&["--out", out, "--format", "csv", "uniform", "--k", "1", "--mu", "1", "--lambda", "0.5", "--degree", "4"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("uniform.csv")).unwrap();
    assert!(csv.starts_with("k,mu,lambda,degree,y,x\n1,1,0.5,4,"), "{csv}");
}

#[test]
fn network_estimate_on_mission() {
    let o = run(&["network", "estimate", mission().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("mission_17th") && s.contains("0.980000"));
    assert!(s.contains("cruising share"));

    // no demand is given, so the forward solve is a validation error
    let o = run(&["--scenario", mission().to_str().unwrap(), "network", "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}

#[test]
fn report_bytes_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["--out", d.path().to_str().unwrap(), "--seed", "9", "report", mission().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = fs::read(a.path().join("report.json")).unwrap();
    let rb = fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    let report: curbflow::Report = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report.sim.as_ref().unwrap().config.seed, 9);

    // the echoed scenario reloads to the recorded hash
    let echo = a.path().join("echo.json");
    fs::write(&echo, serde_json::to_string(&report.scenario).unwrap()).unwrap();
    let back = curbflow::load_scenario(&echo).unwrap();
    assert_eq!(back.content_hash().unwrap(), report.input_hash);
}

#[test]
fn plot_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let report_dir = dir.path().join("r");
    let o = run(&["--out", report_dir.to_str().unwrap(), "optimize", mission().to_str().unwrap()]);
    assert!(o.status.success());
    let plots = dir.path().join("p");
    let o = run(&[
        "--out",
        plots.to_str().unwrap(),
        "plot",
        "--report",
        report_dir.join("optimize.json").to_str().unwrap(),
        "--k",
        "1,5,10",
        "--svg",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["arrival_curves.csv", "arrival_curves.svg", "pricing.csv", "pricing.svg"] {
        assert!(plots.join(f).exists(), "{f}");
    }
    assert!(!plots.join("simulation.csv").exists());
    let o = run(&[
        "--out",
        plots.to_str().unwrap(),
        "plot",
        "--report",
        report_dir.join("optimize.json").to_str().unwrap(),
        "--kind",
        "simulation",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocks.csv"), "id,k,mu,lambda,observed_u,price,through_traffic,cap\na,-1,1,,,,,\n").unwrap();
    let s = dir.path().join("s.json");
    fs::write(&s, r#"{"blocks_csv":"blocks.csv"}"#).unwrap();
    let o = run(&["report", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("`k`"), "{err}");

    assert_eq!(run(&["optimize"]).status.code(), Some(2));
    assert_eq!(run(&["invert", "--k", "0", "--mu", "1", "--u", "0.5"]).status.code(), Some(2));
}

#[test]
fn simulate_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.json");
    fs::write(
        &s,
        r#"{"blocks":[{"id":"a","k":2,"mu":1.0,"lambda":1.0},{"id":"b","k":2,"mu":1.0,"lambda":1.0}],
            "edges":[{"from":"a","to":"b"},{"from":"b","to":"a"}]}"#,
    )
    .unwrap();
    let o = run(&["--format", "csv", "--seed", "4", "simulate", s.to_str().unwrap(), "--horizon", "300", "--replications", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("id,occupancy,half_width,blocking,rejection_rate,analytic_occupancy\n"));
    assert_eq!(csv.lines().count(), 3);
}
