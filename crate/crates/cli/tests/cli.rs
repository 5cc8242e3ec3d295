use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "tiny"

[problem]
filter_radius = 1.5
volume_fraction = 0.4

[problem.grid]
dims = [16, 6, 2]
spacing = [1.0, 1.0, 1.0]
origin = [0.0, 0.0, 0.0]

[problem.material]
youngs = 100.0
poisson = 0.3

[[problem.supports]]
nodes = { min = [0.0, 0.0, 0.0], max = [0.0, 6.0, 2.0] }

[[problem.loads]]
nodes = { min = [16.0, 3.0, 0.0], max = [16.0, 3.0, 2.0] }
force = [0.0, -1.0, 0.0]

[topopt]
max_iterations = 30

[threshold]
volume_fraction = 0.4
eta = 0.3

[csg]
resolution = 32
"#;

fn voxframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxframe")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SMALL);
    assert_eq!(voxframe(&["validate-config", &good]).status.code(), Some(0));
    let bad = write_config(dir.path(), &SMALL.replace("filter_radius = 1.5", "filter_radius = -1.0"));
    let out = voxframe(&["validate-config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    assert_eq!(voxframe(&["validate-config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(voxframe(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();

    let out = voxframe(&["-q", "run", &cfg, "--stages", "skeleton", "--output", run_s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold"));

    let out = voxframe(&["-q", "run", &cfg, "--output", run_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "frame.json", "solid.stl", "topopt_history.csv", "frame_history.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let out = voxframe(&["report", run_s]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("voxel model") && text.contains("| total |"), "{text}");

    let out = voxframe(&["report", "--json", run_s]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sum: f64 = v["stage_times"].as_array().unwrap().iter().map(|s| s["wall_time_s"].as_f64().unwrap()).sum();
    assert!((sum - v["total_wall_time_s"].as_f64().unwrap()).abs() < 1e-9);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(voxframe(&["report", empty.to_str().unwrap()]).status.code(), Some(1));

    let out = voxframe(&["-q", "run", &cfg, "--stages", "graph,frame", "--output", run_s]);
    assert_eq!(out.status.code(), Some(0));
    assert!(voxframe(&["run", &cfg, "--stages", "mesh"]).status.code() == Some(1));
}
