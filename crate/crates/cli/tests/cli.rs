use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aoi_cli::table::{read_sweep, read_table, SWEEP_HEADER};

fn aoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi")).args(args).output().expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(aoi(&["analyze", "--set", "lambda1=0.3"]).status.code(), Some(0));
    let unstable = aoi(&["analyze", "--set", "lambda1=2"]);
    assert_eq!(unstable.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unstable.stderr).contains("unstable"));
    assert_eq!(aoi(&["analyze", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(aoi(&["analyze", "--set", "alpha=-1"]).status.code(), Some(2));
    assert_eq!(aoi(&["simulate", "--set", "lambda1=abc"]).status.code(), Some(2));
}

#[test]
fn scenario_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "lambda1 = 0.3\nservice = weibull(2)\n").unwrap();
    let out = aoi(&["analyze", "--config", path_arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
    let missing = aoi(&["analyze", "--config", path_arg(&dir.path().join("none.cfg"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sweep_files_have_fixed_header_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoi(&["sweep", "--preset", "fig3", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    for law in ["erlang2", "h2"] {
        let text = fs::read_to_string(dir.path().join(format!("fig3_{law}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
        let rows = read_sweep(&text).unwrap();
        // 10 grid values, 3 source counts, 2 variants
        assert_eq!(rows.len(), 60);
        assert!(rows.iter().all(|r| r.service_dist == law && r.delta_sim_mean.is_none()));
        assert!(rows.iter().all(|r| r.stable_flag && r.delta_analytic.is_some()));
    }
}

#[test]
fn unstable_points_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoi(&["sweep", "--preset", "fig3", "--set", "lambda_other=0.5", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    let rows = read_sweep(&fs::read_to_string(dir.path().join("fig3_h2.csv")).unwrap()).unwrap();
    let unstable: Vec<_> = rows.iter().filter(|r| !r.stable_flag).collect();
    assert!(!unstable.is_empty() && unstable.len() < rows.len());
    assert!(unstable.iter().all(|r| r.delta_analytic.is_none() && r.p0.is_none()));
}

#[test]
fn no_failures_means_baseline_equals_breakdown_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(aoi(&["sweep", "--preset", "fig6a", "--set", "alpha=0", "--out", path_arg(dir.path())]).status.success());
    for entry in fs::read_dir(dir.path()).unwrap() {
        let rows = read_sweep(&fs::read_to_string(entry.unwrap().path()).unwrap()).unwrap();
        assert!(!rows.is_empty());
        for r in rows.iter().filter(|r| r.variant == "substitution") {
            assert_eq!(r.delta_analytic, r.delta_baseline);
            assert_eq!(r.p_a, Some(1.0));
        }
    }
}

#[test]
fn simulation_output_is_deterministic() {
    let args = ["simulate", "--set", "lambda1=0.3", "--set", "n_sources=2", "--seed", "11", "--replications", "4", "--horizon", "2000"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut v = args.to_vec();
        v.extend(["--out", path_arg(d.path())]);
        assert!(aoi(&v).status.success());
    }
    let fa = fs::read(a.path().join("simulate.csv")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("simulate.csv")).unwrap());
    let (header, rows) = read_table(std::str::from_utf8(&fa).unwrap()).unwrap();
    assert!(header.iter().any(|h| h == "aaoi_ci95"));
    assert!(!rows.is_empty());

    let mut other = args.to_vec();
    other[6] = "12";
    let c = tempfile::tempdir().unwrap();
    other.extend(["--out", path_arg(c.path())]);
    assert!(aoi(&other).status.success());
    assert_ne!(fa, fs::read(c.path().join("simulate.csv")).unwrap());
}

#[test]
fn trace_export() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = aoi(&[
        "simulate",
        "--set",
        "lambda1=0.3",
        "--set",
        "alpha=0.2",
        "--replications",
        "2",
        "--horizon",
        "200",
        "--trace",
        path_arg(&trace),
    ]);
    assert!(out.status.success());
    let (header, rows) = read_table(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(header, ["time", "event_type", "source", "queue_len", "server_mode"]);
    let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows.iter().any(|r| r[4] == "repairing"));
}

#[test]
fn compare_prints_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoi(&[
        "compare",
        "--set",
        "lambda1=0.3",
        "--set",
        "n_sources=3",
        "--replications",
        "5",
        "--horizon",
        "2000",
        "--out",
        path_arg(dir.path()),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# verdict")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("substitution"));
}

#[test]
fn selfcheck_passes() {
    let out = aoi(&["selfcheck"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
