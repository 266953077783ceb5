use std::path::{Path, PathBuf};
use std::process::Command;

use fedbatch_cli::run_cli;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["fedbatch"];
    argv.extend_from_slice(args);
    run_cli(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn simulate_toy_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("toy_surrogate.json");
    assert_eq!(run(&["simulate", "--scenario", s(&sc), "--out", s(tmp.path())]), 0);
    let (header, rows) = read_csv(&tmp.path().join("trajectory.csv"));
    assert_eq!(header[..8], ["time", "x1", "x2", "x3", "x4", "x5", "x6", "x7"]);
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    for r in &rows {
        let (ti, x7): (f64, f64) = (r[0].parse().unwrap(), r[7].parse().unwrap());
        assert_eq!(x7, 1.0 + 0.2 * ti);
    }
}

#[test]
fn outputs_are_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc = scenarios().join("toy_network.json");
    for d in [&a, &b] {
        assert_eq!(run(&["simulate", "--scenario", s(&sc), "--out", s(d.path())]), 0);
    }
    for f in ["trajectory.csv", "events.csv", "report.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analyze_bang_trajectory_has_no_arcs() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let sc = scenarios().join("toy_surrogate.json");
    let sched = tmp.path().join("bang.csv");
    std::fs::write(&sched, "t_start,t_end,u1,u2\n0,4,1,0\n4,10,0,1\n").unwrap();
    assert_eq!(run(&["simulate", "--scenario", s(&sc), "--out", s(&sim), "--schedule", s(&sched)]), 0);
    let an = tmp.path().join("an");
    let traj = sim.join("trajectory.csv");
    assert_eq!(run(&["analyze", "--scenario", s(&sc), "--trajectory", s(&traj), "--out", s(&an)]), 0);
    let r = report(&an);
    assert_eq!(r["diagnostics"]["singular"]["arcs"].as_array().unwrap().len(), 0);
    let (header, rows) = read_csv(&an.join("extremal.csv"));
    assert_eq!(header.last().unwrap(), "H");
    assert_eq!(rows.len(), read_csv(&traj).1.len());
}

#[test]
fn optimize_writes_schedule_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("feed_surrogate.json");
    let setup = scenarios().join("optimize_setup.json");
    assert_eq!(run(&["optimize", "--scenario", s(&sc), "--setup", s(&setup), "--out", s(tmp.path()), "--seed", "3"]), 0);
    let r = report(tmp.path());
    assert_eq!(r["seed"], 3);
    let history: Vec<f64> = r["history"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(history.windows(2).all(|w| w[1] >= w[0]));
    let (header, rows) = read_csv(&tmp.path().join("schedule.csv"));
    assert_eq!(header, ["t_start", "t_end", "u1", "u2"]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn oxygen_report() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenarios().join("oxygen.json");
    assert_eq!(run(&["oxygen", "--scenario", s(&sc), "--out", s(tmp.path())]), 0);
    let r = report(tmp.path());
    assert_eq!(r["analysis"]["terminal_rule"]["consistent"], true);
    assert!(r["analysis"]["prop2"]["inhibition_constants_differ"].as_bool().unwrap());
    let (header, _) = read_csv(&tmp.path().join("oxygen.csv"));
    assert_eq!(header[14], "dH_du3");
}

#[test]
fn check_network_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let net = scenarios().join("network.json");
    for d in [&a, &b] {
        assert_eq!(run(&["check-network", "--network", s(&net), "--seed", "11", "--out", s(d.path())]), 0);
    }
    assert_eq!(report(a.path()), report(b.path()));
    assert_eq!(report(a.path())["not_optimal"], 0);
}

#[test]
fn usage_and_validation_exit_codes() {
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["--help"]), 0);
    let tmp = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios().join("toy_surrogate.json")).unwrap()).unwrap();
    doc["kinetic"]["k_g"] = (-1.0).into();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(run(&["simulate", "--scenario", s(&bad), "--out", s(&out)]), 1);
    let sc = scenarios().join("toy_surrogate.json");
    assert_eq!(run(&["simulate", "--scenario", s(&sc), "--out", s(&out), "--mode", "lp"]), 1);
    assert_eq!(run(&["simulate", "--scenario", s(&sc), "--out", s(&out), "--step", "5"]), 1);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios().join("toy_surrogate.json")).unwrap()).unwrap();
    doc.as_object_mut().unwrap().remove("surrogate");
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fedbatch"))
        .args(["simulate", "--scenario", s(&bad), "--out", s(tmp.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one of `network` and `surrogate`"));
}

#[test]
fn infeasible_coupling_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut net: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios().join("network.json")).unwrap()).unwrap();
    net["v_upper"][0] = 0.5.into();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios().join("toy_network.json")).unwrap()).unwrap();
    doc["network"] = net;
    let p = tmp.path().join("sc.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(run(&["simulate", "--scenario", s(&p), "--out", s(&out)]), 2);
}
