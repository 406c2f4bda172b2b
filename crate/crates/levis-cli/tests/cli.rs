//! End-to-end runs of the `levis` binary: exit codes, file outputs, and
//! byte-identical reruns under fixed seeds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levis_core::fixtures;

fn levis() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levis"))
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        std::fs::write(dir.path().join("net.json"), net.to_json()).unwrap();
        std::fs::write(dir.path().join("spec.json"), spec.to_json()).unwrap();
        std::fs::write(
            dir.path().join("box.json"),
            "{\"lower\": [-5.0, -5.0], \"upper\": [5.0, 5.0]}",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("posbox.json"),
            "{\"lower\": [0.0, 0.0], \"upper\": [4.0, 4.0]}",
        )
        .unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn ball_on_min_net_reports_unit_radius() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["ball", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("box.json")])
        .args(["--out", &ws.arg("ball.json")]));
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(ws.path("ball.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let r = v["radius"].as_f64().unwrap();
    assert!((r - 1.0).abs() < 1e-7, "radius {r}");
    assert_eq!(v["p"], "inf");
    assert_eq!(v["default_box_applied"], false);
}

#[test]
fn ball_center_outside_box_exits_2_with_message() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["ball", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "9,9", "--p", "inf", "--box", &ws.arg("box.json")]));
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("center outside box"));
}

#[test]
fn ball_degenerate_center_exits_2() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["ball", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "-1,3", "--p", "inf", "--box", &ws.arg("box.json")])
        .args(["--out", &ws.arg("deg.json")]));
    assert_exit(&out, 2);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("deg.json")).unwrap()).unwrap();
    assert_eq!(v["radius"].as_f64().unwrap(), 0.0);
}

#[test]
fn hybrid_ball_writes_deterministic_artifact_and_report() {
    let ws = Workspace::new();
    let mut args = vec![
        "ball".to_string(),
        "--net".into(),
        ws.arg("net.json"),
        "--spec".into(),
        ws.arg("spec.json"),
        "--center".into(),
        "2,1".into(),
        "--p".into(),
        "inf".into(),
        "--box".into(),
        ws.arg("box.json"),
        "--solver".into(),
        "hybrid".into(),
        "--audit".into(),
        "--seed".into(),
        "7".into(),
        "--out".into(),
        ws.arg("hball.json"),
    ];
    let out = run(levis().args(&args));
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["gap"].as_f64().unwrap() <= 1e-6);
    let first = std::fs::read(ws.path("hball.json")).unwrap();
    // Identical command line + seed: identical artifact bytes.
    *args.last_mut().unwrap() = ws.arg("hball2.json");
    assert_exit(&run(levis().args(&args)), 0);
    let second = std::fs::read(ws.path("hball2.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn direction_subcommand_matches_ray_cases() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("raybox.json"),
        "{\"lower\": [0.0, 0.0], \"upper\": [5.0, 5.0]}",
    )
    .unwrap();
    // theta = 180 recovers the anchor at k = 1.
    let out = run(levis()
        .args(["direction", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("raybox.json")])
        .args(["--anchor", "2,0", "--theta", "180", "--xi", "0.3,0.7"])
        .args(["--out", &ws.arg("dir.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("dir.json")).unwrap()).unwrap();
    assert!((v["k"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    // Orthogonal ray toward +x never violates: exit 2.
    let out = run(levis()
        .args(["direction", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("raybox.json")])
        .args(["--anchor", "2,0", "--theta", "90", "--xi", "1,0"]));
    assert_exit(&out, 2);
}

#[test]
fn beta_zero_max_balls_is_empty_union_exit_0() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["beta", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("posbox.json")])
        .args(["--delta", "0.02,0.02", "--max-balls", "0", "--out", &ws.arg("union.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("union.json")).unwrap()).unwrap();
    assert_eq!(v["balls"].as_array().unwrap().len(), 0);
}

#[test]
fn beta_union_feeds_radii_csv_and_svg_export() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["beta", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("posbox.json")])
        .args(["--delta", "0.02,0.02", "--max-balls", "8", "--seed", "5"])
        .args(["--out", &ws.arg("union.json"), "--radii-csv", &ws.arg("radii.csv")]));
    assert_exit(&out, 0);
    let csv = std::fs::read_to_string(ws.path("radii.csv")).unwrap();
    assert!(csv.starts_with("ball_index,radius,dist_to_x0"));
    assert!(csv.lines().count() >= 2, "csv: {csv}");

    let out = run(levis()
        .args(["export-svg", "--union", &ws.arg("union.json"), "--box", &ws.arg("posbox.json")])
        .args(["--dims", "0,1", "--out", &ws.arg("union.svg")]));
    assert_exit(&out, 0);
    let svg = std::fs::read_to_string(ws.path("union.svg")).unwrap();
    assert!(svg.contains("<svg"));
    assert!(svg.matches("<rect").count() >= 2, "lInf balls render as squares");
}

#[test]
fn beta_jobs_merges_unions() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["beta", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("posbox.json")])
        .args(["--delta", "0.05,0.05", "--max-balls", "4", "--seed", "3", "--jobs", "3"])
        .args(["--out", &ws.arg("merged.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("merged.json")).unwrap()).unwrap();
    let balls = v["balls"].as_array().unwrap();
    assert!(!balls.is_empty());
    // Per-ball seeds record which run produced them.
    let seeds: std::collections::BTreeSet<u64> =
        balls.iter().map(|b| b["seed"].as_u64().unwrap()).collect();
    assert!(seeds.iter().all(|s| (3..6).contains(s)));
}

#[test]
fn alpha_writes_trace_csv() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["alpha", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--box", &ws.arg("posbox.json")])
        .args(["--seed", "3", "--out", &ws.arg("alpha.json"), "--trace-csv", &ws.arg("trace.csv")]));
    assert_exit(&out, 0);
    let csv = std::fs::read_to_string(ws.path("trace.csv")).unwrap();
    assert!(csv.starts_with("iter,r,c_0,c_1"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("alpha.json")).unwrap()).unwrap();
    assert!(v["radius"].as_f64().unwrap() > 0.0);
    assert!(v["r_efc"].as_f64().unwrap() > 0.0);
}

#[test]
fn baseline_and_oracle_sample_round_trip() {
    let ws = Workspace::new();
    let out = run(levis()
        .args(["baseline", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1", "--p", "inf", "--out", &ws.arg("lb.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("lb.json")).unwrap()).unwrap();
    assert!(v["r_lb"].as_f64().unwrap() > 0.0);

    // Solve a ball, then sample it through the oracle subcommand.
    assert_exit(
        &run(levis()
            .args(["ball", "--net", &ws.arg("net.json"), "--spec", &ws.arg("spec.json")])
            .args(["--center", "2,1", "--p", "2", "--box", &ws.arg("box.json")])
            .args(["--out", &ws.arg("ball2.json")])),
        0,
    );
    let out = run(levis()
        .args(["oracle", "--mode", "sample", "--net", &ws.arg("net.json")])
        .args(["--spec", &ws.arg("spec.json"), "--ball", &ws.arg("ball2.json")])
        .args(["--n", "5000", "--seed", "1", "--out", &ws.arg("rep.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("rep.json")).unwrap()).unwrap();
    assert_eq!(v["violation_count"].as_u64().unwrap(), 0);
}

#[test]
fn datagen_then_train_produces_a_loadable_network() {
    let ws = Workspace::new();
    assert_exit(
        &run(levis().args(["datagen", "--out", &ws.arg("data.json"), "--n", "120", "--seed", "2"])),
        0,
    );
    let out = run(levis()
        .args(["train", "--data", &ws.arg("data.json"), "--out", &ws.arg("trained.json")])
        .args(["--widths", "8", "--epochs", "300", "--lr", "0.01", "--seed", "1"])
        .args(["--metrics-out", &ws.arg("metrics.json")]));
    assert_exit(&out, 0);
    let net = levis_core::net::Network::from_json(
        &std::fs::read_to_string(ws.path("trained.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(net.input_dim(), 3);
    assert_eq!(net.output_dim(), 3);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("metrics.json")).unwrap()).unwrap();
    assert!(m["test_rmse"].as_f64().unwrap().is_finite());
}

#[test]
fn malformed_network_file_is_a_parse_error() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.json"), "{\"input_dim\": 2,\n \"layers\": [}").unwrap();
    let out = run(levis()
        .args(["ball", "--net", &ws.arg("bad.json"), "--spec", &ws.arg("spec.json")])
        .args(["--center", "2,1"]));
    assert_exit(&out, 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "stderr: {err}");
}

#[test]
fn grid_oracle_mode_reports_distance() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("small.json"),
        "{\"lower\": [0.0, -1.0], \"upper\": [4.0, 3.0]}",
    )
    .unwrap();
    let out = run(levis()
        .args(["oracle", "--mode", "grid", "--net", &ws.arg("net.json")])
        .args(["--spec", &ws.arg("spec.json"), "--center", "2,1", "--p", "inf"])
        .args(["--box", &ws.arg("small.json"), "--step", "0.01", "--out", &ws.arg("grid.json")]));
    assert_exit(&out, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("grid.json")).unwrap()).unwrap();
    let d = v["distance"].as_f64().unwrap();
    assert!((d - 1.0).abs() <= 0.02, "distance {d}");
}

#[allow(dead_code)]
fn touch(_p: &Path) {}
