use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivp"))
        .args(args)
        .output()
        .expect("ivp runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Terminal bounds from a `scalar-demo` summary line.
fn terminal_interval(out: &str, method: &str) -> (f64, f64) {
    let line = out
        .lines()
        .find(|l| l.starts_with(&format!("{method}:")))
        .expect("summary line");
    let inner = line.split('[').nth(1).unwrap().split(']').next().unwrap();
    let mut parts = inner.split(',').map(|s| s.trim().parse::<f64>().unwrap());
    (parts.next().unwrap(), parts.next().unwrap())
}

#[test]
fn scalar_demo_stable_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scalar-demo",
        "--method",
        "stable",
        "--horizon",
        "10",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (lo, hi) = terminal_interval(&stdout(&o), "stable");
    assert!(
        (lo + 0.2).abs() <= 1e-2 && (hi - 0.2).abs() <= 1e-2,
        "[{lo}, {hi}]"
    );
    for f in [
        "traces_stable.csv",
        "traces_stable.json",
        "plot.svg",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn scalar_demo_naive_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scalar-demo",
        "--method",
        "naive",
        "--horizon",
        "5",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("diverging"));
    let line = stdout(&o);
    let ratio: f64 = line
        .split("width ratio vs t=0 ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(ratio > 100.0, "{ratio}");
    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.contains(">clipped</text>"));
}

#[test]
fn scalar_demo_reads_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("scalar_demo.json");
    let with_file = run(&[
        "scalar-demo",
        "--scenario",
        p(&file),
        "--out",
        p(dir.path()),
    ]);
    let built_in = run(&["scalar-demo", "--out", p(dir.path())]);
    assert_eq!(with_file.status.code(), Some(0));
    assert_eq!(stdout(&with_file), stdout(&built_in));
}

#[test]
fn flag_errors_exit_2() {
    for args in [
        vec!["scalar-demo", "--dt", "-1"],
        vec!["scalar-demo", "--horizon", "0"],
        vec!["scalar-demo", "--method", "fancy"],
        vec!["highway"],
        vec!["cert"],
        vec!["nonsense"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).to_lowercase().contains("usage"), "{args:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_ivp"))
        .args(["scalar-demo", "--format", "csv", "--out", "/dev/null/x"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ivp"))
        .env("IVP_THREADS", "zero")
        .args(["scalar-demo"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn highway_stable_has_no_lpv_violations() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("highway_two_vehicle.json");
    let o = run(&[
        "highway",
        "--scenario",
        p(&file),
        "--method",
        "stable",
        "--mc",
        "500",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("stable: 0 of 500 truth samples leave the tube"));
    assert!(!stderr(&o).contains("diverging"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "highway");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["flags"]["mc"], 500);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn highway_naive_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("highway_two_vehicle.json");
    let o = run(&[
        "highway",
        "--scenario",
        p(&file),
        "--method",
        "naive",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: the naive tube is diverging"));
}

#[test]
fn highway_lane_hypotheses_and_nonlinear_truth() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("highway_lanes.json");
    let o = run(&[
        "highway",
        "--scenario",
        p(&file),
        "--mc",
        "100",
        "--truth",
        "nonlinear",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("lanes [0, 1]"), "{out}");
    assert!(
        out.contains("0 of 100 truth samples leave the tube"),
        "{out}"
    );
    let json = std::fs::read_to_string(dir.path().join("traces_stable.json")).unwrap();
    assert!(json.contains("\"truth\""));
}

#[test]
fn input_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["highway", "--scenario", "does/not/exist.json"]);
    assert_eq!(missing.status.code(), Some(4));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(scenario("highway_two_vehicle.json"))
        .unwrap()
        .replacen("0.7, 1.5", "0.2, 1.5", 1);
    std::fs::write(&bad, text).unwrap();
    let o = run(&["highway", "--scenario", p(&bad), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("parameter box order"), "{}", stderr(&o));

    std::fs::write(&bad, "{\"schema\": 1,\n \"scalar\": ").unwrap();
    let o = run(&["scalar-demo", "--scenario", p(&bad), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let wrong_kind = run(&["highway", "--scenario", p(&scenario("scalar_demo.json"))]);
    assert_eq!(wrong_kind.status.code(), Some(4));
    let cert_missing = run(&[
        "cert",
        "check",
        "--model",
        p(&scenario("scalar_model.json")),
        "--cert",
        "nope.json",
    ]);
    assert_eq!(cert_missing.status.code(), Some(4));
}

#[test]
fn embedding_failures_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenario("highway_two_vehicle.json")).unwrap();
    // No lateral gains: the lateral matrix is a Jordan block.
    let frozen = base
        .replace("[0.3, 0.5, 0.05, 0.5, 1.0]", "[0.5, 1.0, 0.1, 0.0, 0.0]")
        .replace("[0.7, 1.5, 0.2, 2.0, 3.0]", "[0.5, 1.0, 0.1, 0.0, 0.0]");
    let cyclic = base.replacen("\"front\": null", "\"front\": \"target\"", 1);
    for (name, text) in [("frozen.json", frozen), ("cyclic.json", cyclic)] {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let o = run(&["highway", "--scenario", p(&path), "--out", p(dir.path())]);
        assert_eq!(o.status.code(), Some(5), "{name}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "));
    }
}

#[test]
fn certificate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let model = scenario("scalar_model.json");
    let cert = dir.path().join("c.json");
    let found = run(&["cert", "find", "--model", p(&model), "--out", p(&cert)]);
    assert_eq!(found.status.code(), Some(0));
    let checked = run(&["cert", "check", "--model", p(&model), "--cert", p(&cert)]);
    assert_eq!(checked.status.code(), Some(0));
    assert!(stdout(&checked).contains("feasible true"));

    let zero = dir.path().join("zero.json");
    std::fs::write(
        &zero,
        r#"{"schema": 1, "certificate": {"p": [0, 0], "q": [0, 0], "q_plus": [0, 0],
            "q_minus": [0, 0], "z_plus": [0, 0], "z_minus": [0, 0], "psi_plus": [0, 0],
            "psi_minus": [0, 0], "psi": [0, 0], "gamma": [0, 0]}}"#,
    )
    .unwrap();
    let o = run(&["cert", "check", "--model", p(&model), "--cert", p(&zero)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("positivity1_margin 0\n") && out.contains("positivity2_margin 0\n"));

    let anti = run(&[
        "cert",
        "find",
        "--model",
        p(&scenario("antistable_model.json")),
        "--out",
        p(&dir.path().join("a.json")),
    ]);
    assert_eq!(anti.status.code(), Some(1));
    assert!(stdout(&anti).contains("infeasible"));
    assert!(!dir.path().join("a.json").exists());

    let short = dir.path().join("short.json");
    std::fs::write(
        &short,
        r#"{"schema": 1, "certificate": {"p": [1], "q": [1], "q_plus": [1], "q_minus": [1],
            "z_plus": [1], "z_minus": [1], "psi_plus": [1], "psi_minus": [1], "psi": [1],
            "gamma": [1]}}"#,
    )
    .unwrap();
    let o = run(&["cert", "check", "--model", p(&model), "--cert", p(&short)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn formats_select_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "scalar-demo",
        "--method",
        "both",
        "--format",
        "csv",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["manifest.json", "traces_naive.csv", "traces_stable.csv"]
    );
    let csv = std::fs::read_to_string(dir.path().join("traces_naive.csv")).unwrap();
    assert!(csv.starts_with("t,vehicle,coord,lower,upper\n"));
    assert_eq!(csv.lines().count(), 1002);
}
