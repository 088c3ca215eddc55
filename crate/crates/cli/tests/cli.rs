use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "[problem]\nh = 0.015625\ndegree = 24\n";

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafdbar"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(dir: &Path, file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(file)).unwrap()).unwrap()
}

#[test]
fn lemmas_have_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lemmas", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(dir.path(), "lemmas.json");
    assert_eq!(r["data"]["sample_count"], 100_000);
    let checks = r["data"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["violations"] == 0));
    let m = read_json(dir.path(), "manifest_lemmas.json");
    assert_eq!(m["config_hash"], r["config_hash"]);
}

#[test]
fn zero_rhs_gives_zero_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}[[problem.boxes]]\namplitude = 0.0\n"));
    let out = run(&["solve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(dir.path(), "solve.json");
    assert!(r["data"]["annulus_norms"].as_array().unwrap().iter().all(|x| x == 0.0));
    let grid = fs::read_to_string(dir.path().join("out/u_t.grid")).unwrap();
    let body = grid.split("data\n").nth(1).unwrap();
    assert!(body.lines().all(|l| l == "0e0 0e0"));
}

#[test]
fn constants_are_positive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = run(&["constants", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(dir.path(), "constants.json");
    for c in ["c1", "c2", "c3", "c4"] {
        assert!(r["data"][c].as_f64().unwrap() > 0.0, "{c}");
    }
    assert_eq!(r["data"]["k"], 0);
}

#[test]
fn boundary_sweep_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}[problem.action]\nkind = \"boundary\"\n"));
    let out = run(&["sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2(k+1)"));
}

#[test]
fn bad_configs_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["[problem.weight]\nm = 5\ns = 4\n", "[problem]\nbogus = 1\n", "[problem\n"] {
        let cfg = config(dir.path(), text);
        let out = run(&["group", "--config", &cfg], dir.path());
        assert_eq!(out.status.code(), Some(1), "{text}");
    }
    let cfg = config(dir.path(), &format!("{SMALL}[solve]\nword = \"x\"\n"));
    assert_eq!(run(&["solve", "--config", &cfg], dir.path()).status.code(), Some(1));
}

#[test]
fn report_needs_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["group"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["report"], dir.path()).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("group,") && l.contains("relation_residual")));
}

#[test]
fn artifacts_do_not_depend_on_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let cfg = config(dir.path(), SMALL);
        for cmd in ["solve", "group"] {
            let out = run(&[cmd, "--config", &cfg, "--threads", threads], dir.path());
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}
