use std::path::Path;
use std::process::{Command, Output};

use deadbeat::harness::plot::polyline_points;

fn deadbeat(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deadbeat"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn preset_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = deadbeat(&["preset", "fig1", "--out-dir", "o"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.matches("overall PASS").count(), 3);
    assert!(stdout.lines().any(|l| l.starts_with("check omega_envelope PASS")));

    let o = dir.path().join("o");
    let csv = std::fs::read_to_string(o.join("red.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[1] <= 0.01);
    assert_eq!((last[4], last[5]), (0.0, 0.0));

    let svg = std::fs::read_to_string(o.join("xy_track.svg")).unwrap();
    let lines = polyline_points(&svg);
    assert_eq!(lines.len(), 3);
    for l in lines {
        let (x, y) = *l.last().unwrap();
        assert!(x.hypot(y) <= 0.01);
    }
    let omega = std::fs::read_to_string(o.join("omega_vs_t.svg")).unwrap();
    assert_eq!(omega.matches("class=\"cutoff\"").count(), 3);
}

#[test]
fn curb_safe_track_stays_below_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out = deadbeat(&["preset", "fig5", "--out-dir", "."], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("xy_track.svg")).unwrap();
    for l in polyline_points(&svg) {
        assert!(l.iter().all(|&(_, y)| y <= 0.0));
    }
}

#[test]
fn check_recertifies_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(deadbeat(&["preset", "fig1", "--out-dir", "."], dir.path()).status.success());
    let ok = deadbeat(&["check", "red.csv", "--law", "thm1,c1=1.01,c2=5,v=0.5", "--cutoff", "0.01"], dir.path());
    assert!(ok.status.success(), "{}", text(&ok.stderr));
    assert!(text(&ok.stdout).contains("overall PASS"));

    // a trace certified against a law it was not produced by
    let wrong = deadbeat(&["check", "red.csv", "--law", "thm1,c1=3,c2=3,v=0.5"], dir.path());
    assert_eq!(wrong.status.code(), Some(1));
    assert!(text(&wrong.stdout).contains("overall FAIL"));
}

#[test]
fn run_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("line.toml"),
        r#"
schema = 1
outputs = ["csv"]
[[scenario]]
name = "line"
cutoff_rho = 0.1
initial_pose = { x = -1, y = 0, theta = 0 }
law = { kind = "thm1", v = 1, c1 = 2, c2 = 2 }
"#,
    )
    .unwrap();
    let out = deadbeat(&["run", "line.toml", "--step", "0.05", "--cutoff", "0.2"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/line/line.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!((rows[1][0] - 0.05).abs() < 1e-15);
    for r in &rows {
        assert!((r[1] - (1.0 - r[0])).abs() < 1e-12, "rho linear in t");
    }
    assert!(rows.last().unwrap()[1] <= 0.2);
    assert!(!dir.path().join("out/line/xy_track.svg").exists());
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        r#"
schema = 1
[[scenario]]
name = "bad"
cutoff_rho = 0.01
initial = { rho = 1, delta = 0, gamma = 0.2 }
law = { kind = "thm1", v = 0.5, c1 = 0.5, c2 = 5 }
"#,
    )
    .unwrap();
    let out = deadbeat(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("min(c1, c2) > 1"));
    assert_eq!(deadbeat(&["preset", "fig9"], dir.path()).status.code(), Some(2));
    assert_eq!(deadbeat(&["run", "missing.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_writes_rerunnable_points() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = Path::new(env!("CARGO_MANIFEST_DIR")).join("sweeps/thm5.toml");
    let out = deadbeat(&["sweep", sweep.to_str().unwrap(), "--workers", "2", "--out-dir", "s"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("grid points: 3"));
    assert!(text(&out.stdout).contains("pass_fraction 1.000000"));
    let summary = std::fs::read_to_string(dir.path().join("s/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let rerun = deadbeat(&["run", "s/points/thm5_0001.toml", "--out-dir", "r"], dir.path());
    assert!(rerun.status.success(), "{}", text(&rerun.stderr));
    let row = summary.lines().nth(2).unwrap();
    let parking: f64 = row.split(',').nth(8).unwrap().parse().unwrap();
    let csv = std::fs::read_to_string(dir.path().join("r/thm5_0001.csv")).unwrap();
    let t_last: f64 = csv.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(t_last, parking);
}
