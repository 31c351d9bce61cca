use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], env_output: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_homopolymer"));
    cmd.args(args).env_remove("HOMOPOLYMER_OUTPUT_DIR");
    if let Some(dir) = env_output {
        cmd.env("HOMOPOLYMER_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn sidecar(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn successful_run_prints_the_sidecar_path() {
    let dir = TempDir::new().unwrap();
    let out = run(&["critical-beta", "--dim", "3", "--output", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8(out.stdout).unwrap();
    let meta_path = dir.path().join("critical-beta.meta.json");
    assert_eq!(printed.trim(), meta_path.to_str().unwrap());
    let meta = sidecar(&meta_path);
    let beta = meta["constants"]["beta_c"]["value"].as_f64().unwrap();
    assert!((beta - 3.956776).abs() < 1e-5);
    assert!(dir.path().join("critical-beta.csv").exists());
}

#[test]
fn every_column_carries_units_and_a_definition() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["i-lambda", "--dim", "1", "--output", d],
        vec!["eigenfunction", "--dim", "5", "--box-radius", "3", "--output", d],
        vec!["asymptotics", "--dim", "3", "--output", d],
    ] {
        let out = run(&args, None);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let meta = sidecar(Path::new(String::from_utf8(out.stdout).unwrap().trim()));
        for key in ["columns", "plot_columns"] {
            for col in meta[key].as_array().unwrap() {
                assert!(!col["units"].as_str().unwrap().is_empty(), "{args:?} {col}");
                assert!(!col["definition"].as_str().unwrap().is_empty(), "{args:?} {col}");
            }
        }
        for (name, c) in meta["constants"].as_object().unwrap() {
            assert!(!c["units"].as_str().unwrap().is_empty(), "{name}");
        }
    }
}

#[test]
fn rerunning_from_a_sidecar_reproduces_the_data() {
    let first = TempDir::new().unwrap();
    let out = run(
        &[
            "escape", "--dim", "3", "--samples", "2000", "--t", "200", "--seed", "9", "--output",
            first.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let meta_path = first.path().join("escape.meta.json");
    let original = fs::read(first.path().join("escape.csv")).unwrap();

    // The stored output directory is reused, so overwrite in place.
    fs::remove_file(first.path().join("escape.csv")).unwrap();
    let out = run(&["--config", meta_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(first.path().join("escape.csv")).unwrap(), original);
}

#[test]
fn environment_sets_the_default_output_directory() {
    let dir = TempDir::new().unwrap();
    let out = run(&["critical-beta", "--dim", "4", "--format", "json"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let data: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("critical-beta.json")).unwrap()).unwrap();
    assert_eq!(data["command"], "critical-beta");
    assert_eq!(data["rows"][0]["dim"], 4);
}

#[test]
fn recurrent_dimensions_are_flagged() {
    let dir = TempDir::new().unwrap();
    let out = run(&["critical-beta", "--dim", "2", "--output", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("critical-beta.csv")).unwrap();
    assert!(csv.contains("recurrent"), "{csv}");
}

#[test]
fn bad_requests_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["nonsense"],
        vec!["partition", "--dim", "0", "--output", d],
        vec!["partition", "--t", "-1", "--output", d],
        vec!["partition", "--t", "1", "--step", "5", "--output", d],
        vec!["--config", "/definitely/not/here.json"],
        vec!["partition", "--beta", "hot", "--output", d],
        vec![],
    ] {
        let out = run(&args, None);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("heat-kernel"));
}

#[test]
fn failed_self_checks_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["heat-kernel", "--dim", "3", "--t", "1000", "--step", "0.1", "--output", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("halving"));
}
