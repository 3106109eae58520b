use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hele-homog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn rq_curve_plateau() {
    let o = run(&[
        "rq",
        "curve",
        "--medium",
        "builtin:pinning",
        "--qmin",
        "0.5",
        "--qmax",
        "1",
        "--samples",
        "6",
        "--T",
        "200",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "q [1/length],r_hat [length/time],err [length/time]"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert!((0.995..=1.005).contains(&row[1]), "{row:?}");
    }
}

#[test]
fn timescale_identity_branch() {
    let o = run(&[
        "timescale",
        "eval",
        "--kind",
        "sub",
        "--alpha",
        "1",
        "--gamma",
        "1",
        "--lambda",
        "0",
        "--t",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "value 3\nderivative 1\n");
}

#[test]
fn timescale_table_and_horizon() {
    let o = run(&[
        "timescale",
        "eval",
        "--kind",
        "theta",
        "--gamma",
        "1",
        "--lambda",
        "0.5",
        "--t-end",
        "0.15",
        "--samples",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("t [time],value [time],derivative [1]\n"));
    assert_eq!(text.lines().count(), 6);
    let o = run(&[
        "timescale",
        "eval",
        "--kind",
        "super",
        "--alpha",
        "1.2",
        "--gamma",
        "1",
        "--t",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn medium_parse_error_has_caret() {
    let o = run(&["medium", "check", "--expr", "1+"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("offset 2"), "{err}");
    assert!(err.contains("  1+\n    ^"), "{err}");
}

#[test]
fn medium_check_reports_bounds() {
    let o = run(&["medium", "check", "--medium", "pinning"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["bounds"]["m"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["bounds"]["M"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    // not lattice periodic in x1
    let o = run(&["medium", "check", "--expr", "2 + sin(x1)"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["rq", "curve", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["nosuch"]).status.code(), Some(1));
    assert_eq!(run(&["rq", "curve"]).status.code(), Some(1));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("sim2d"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1, "medium": "harmonic", "qmin": 0.5, "qmax": 1.0, "samples": 3, "T": 50}"#,
    );
    let o = run(&["rq", "curve", "--config", &cfg, "--qmax", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("2,"), "{text}");
    let r: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((r - 2.0 * 2f64.sqrt()).abs() < 0.05);

    let bad = write_config(dir.path(), "bad.json", r#"{"version": 1, "qmin": 0.5, "typo": 1}"#);
    let o = run(&["rq", "curve", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo"));

    let unversioned = write_config(dir.path(), "nov.json", r#"{"qmin": 0.5, "qmax": 1}"#);
    assert_eq!(run(&["rq", "curve", "--config", &unversioned]).status.code(), Some(1));
}

#[test]
fn curve_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("c.svg");
    let csv = dir.path().join("c.csv");
    let o = run(&[
        "rq",
        "curve",
        "--medium",
        "constant",
        "--qmin",
        "0.5",
        "--qmax",
        "1",
        "--samples",
        "4",
        "--T",
        "20",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<polyline"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
}

#[test]
fn obstacle_and_candidates() {
    let o = run(&[
        "rq", "obstacle", "--q", "0.75", "--r", "1.2", "--eps", "0.1", "--side", "sub", "--T", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("t [time],front [length],phi [length]\n"));
    let phis: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(phis[0], 0.0);
    assert!(phis.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(
        run(&["rq", "obstacle", "--q", "1", "--r", "1", "--eps", "0.1", "--side", "sideways"])
            .status
            .code(),
        Some(1)
    );
    // dt above eps/10 is a validation failure
    assert_eq!(
        run(&["rq", "obstacle", "--q", "1", "--r", "1", "--eps", "0.1", "--side", "sub", "--dt", "0.5"])
            .status
            .code(),
        Some(1)
    );

    let o = run(&[
        "rq",
        "candidates",
        "--medium",
        "constant",
        "--q",
        "0.8",
        "--beta",
        "0.9",
        "--eps",
        "0.1,0.05",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in text.lines().take(2) {
        let v: f64 = line.split(' ').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.8).abs() < 1e-4, "{text}");
    }
    assert_eq!(run(&["rq", "candidates", "--beta", "0.5"]).status.code(), Some(1));
}

#[test]
fn barrier_and_geometry_reports() {
    let o = run(&["barrier", "verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("check,residual,margin,points,pass\n"));
    let o = run(&["barrier", "verify", "--json", "--n", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    let o = run(&[
        "geometry", "report", "--q", "0,-1", "--r", "1", "--m", "1", "--M", "2", "--rays", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["rV_plus"].as_f64().unwrap() - 2.0).abs() < 1e-15);
    assert!((v["theta"].as_f64().unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    assert_eq!(v["rays"].as_array().unwrap().len(), 3);
    // one-dimensional slopes have no cone
    assert_eq!(
        run(&["geometry", "report", "--q", "1", "--m", "1", "--M", "2"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sim2d_run_and_converge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"version": 1, "medium": "builtin:pinning", "lx": 2.0, "nx": 160, "ny": 8, "psi0": 0.8, "h0": 1.0, "T": 0.3, "eps": 0.1}"#,
    );
    let out = dir.path().join("run");
    let o = run(&[
        "sim2d",
        "run",
        "--config",
        &cfg,
        "--out-dir",
        out.to_str().unwrap(),
        "--T",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("fronts.csv")).unwrap();
    assert!(csv.starts_with("t [time],y [length],h [length]\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!((summary["final_time"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(summary["config"]["T"].as_f64(), Some(0.2));

    let o = run(&["sim2d", "converge", "--config", &cfg, "--eps", "0.2,0.1,0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 2);
    // too few eps values
    assert_eq!(
        run(&["sim2d", "converge", "--config", &cfg, "--eps", "0.2,0.1"])
            .status
            .code(),
        Some(1)
    );
    // grid too coarse for eps
    assert_eq!(
        run(&["sim2d", "converge", "--config", &cfg, "--eps", "0.02,0.01,0.005"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn numerical_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // the front reaches the far wall of a short strip
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"version": 1, "medium": "constant", "lx": 1.2, "nx": 24, "ny": 8, "psi0": 1.0, "h0": 1.0, "T": 5.0}"#,
    );
    let o = run(&[
        "sim2d",
        "run",
        "--config",
        &cfg,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn in_process_dispatch_matches_binary() {
    let args = [
        "hele-homog",
        "timescale",
        "eval",
        "--kind",
        "super",
        "--alpha",
        "1.2",
        "--gamma",
        "1",
        "--t",
        "0.5",
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = hele_homog::cli::dispatch_to(args, &mut out, &mut err);
    assert_eq!(code, 0);
    assert_eq!(out, run(&args[1..]).stdout);
}
