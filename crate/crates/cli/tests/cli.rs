use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sweepcarve")).args(args).output().unwrap();
    if out.status.code() == Some(1) {
        panic!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Session {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Session {
    fn new() -> Session {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let traj = root.join("traj.csv");
        let scene = root.join("scene");
        run(&[
            "harness", "gen", "--scene", "planar3", "--seed", "3", "--n", "60", "--step", "0.03",
            "--out", s(&traj), "--scene-dir", s(&scene),
        ]);
        Session { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

#[test]
fn staged_commands_build_a_model_the_trajectory_passes() {
    let t = Session::new();
    let chain = t.path("scene/chain.json");
    assert!(chain.exists());
    assert!(t.path("scene/obstacle_1.obj").exists());
    let traj = t.path("traj.csv");

    run(&["sweep", "--chain", s(&chain), "--traj", s(&traj), "--spacing", "0.02", "--out-dir", s(&t.path("sv"))]);
    for i in 1..=3 {
        assert!(t.path(&format!("sv/sv_link_{i}.obj")).exists());
    }
    let stats: Value = serde_json::from_str(&fs::read_to_string(t.path("sv/sweep_stats.json")).unwrap()).unwrap();
    assert!(stats["margin_budget"].as_f64().unwrap() > 0.0);

    run(&["decimate", "--in", s(&t.path("sv")), "--out", s(&t.path("svd"))]);
    assert!(t.path("svd/svd_link_1.obj").exists());
    assert!(t.path("svd/decimate_stats.json").exists());

    let out = run(&[
        "carve", "--svs", s(&t.path("svd")), "--spacing", "0.02", "--out", s(&t.path("v_o.obj")),
        "--model", s(&t.path("v_o.json")),
    ]);
    let meta: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(meta["margin_budget"].as_f64().unwrap() >= stats["margin_budget"].as_f64().unwrap());

    let out = run(&[
        "check", "--chain", s(&chain), "--model", s(&t.path("v_o.json")), "--traj", s(&traj),
        "--report", s(&t.path("check.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(t.path("check.json")).unwrap()).unwrap();
    assert_eq!(report["free"], Value::Bool(true));

    // folded back onto the base, far from anything explored
    let bad = t.path("bad.csv");
    fs::write(&bad, "t,q1,q2,q3\n0,0,0,0\n0.1,2.7,2.5,2.5\n").unwrap();
    let out = run(&["check", "--chain", s(&chain), "--model", s(&t.path("v_o.json")), "--traj", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_config_writes_report() {
    let t = Session::new();
    let config = serde_json::json!({
        "chain": "scene/chain.json",
        "sessions": [{"id": "s1", "trajectory": "traj.csv"}],
        "grid": {"spacing": 0.02},
        "decimation": "skip",
        "output_dir": "run",
    });
    fs::write(t.path("config.json"), config.to_string()).unwrap();
    let out = run(&["pipeline", "--config", s(&t.path("config.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.is_object());
    assert!(t.path("run/v_o.obj").exists());
    assert!(t.path("run/report.json").exists());
}

#[test]
fn bad_config_is_rejected() {
    let t = Session::new();
    fs::write(t.path("config.json"), r#"{"chain": "scene/chain.json", "grid": {"spacing": -1}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sweepcarve"))
        .args(["pipeline", "--config", s(&t.path("config.json"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn oracle_measures_a_cube() {
    let t = Session::new();
    let obstacle = t.path("scene/obstacle_1.obj");
    let out = run(&["harness", "oracle", "--mesh", s(&obstacle), "--n", "20000", "--cross-check"]);
    let est: Value = serde_json::from_slice(&out.stdout).unwrap();
    let vol = est["volume"].as_f64().unwrap();
    assert!((vol - 0.027).abs() < 0.003, "volume {vol}");
    assert_eq!(est["disagreements"], Value::from(0));
}
