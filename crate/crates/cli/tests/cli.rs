use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn etdist(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_etdist")).args(args).current_dir(dir).env_remove("ET_LOG").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn value(json: &str) -> f64 {
    let v: Value = serde_json::from_str(json).unwrap();
    v["value"].as_f64().unwrap()
}

#[test]
fn measure_mode_identical_files_give_zero() {
    let d = data();
    let tri = d.join("tri.json");
    let (code, out, _) = etdist(&["dist", tri.to_str().unwrap(), tri.to_str().unwrap(), "--mode", "measure", "--verify"], &d);
    assert_eq!(code, 0);
    assert!(value(&out).abs() < 1e-9, "{out}");
}

#[test]
fn sturm_mode_permuted_copies_vanish() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "a.json", r#"{"points": [[0, 0], [1, 0], [0.3, 0.7]], "metric": "euclidean", "mass": [1, 2, 0.5]}"#);
    write(t.path(), "b.json", r#"{"points": [[0.3, 0.7], [0, 0], [1, 0]], "metric": "euclidean", "mass": [0.5, 1, 2]}"#);
    let (code, out, err) = etdist(&["dist", "a.json", "b.json", "--verify"], t.path());
    assert_eq!(code, 0, "{err}");
    assert!(value(&out) <= 1e-6, "{out}");
}

#[test]
fn dirac_pair_under_hk() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "one.json", r#"{"dist": [[0]], "mass": [1]}"#);
    write(t.path(), "four.json", r#"{"dist": [[0]], "mass": [4]}"#);
    let (code, out, _) = etdist(&["dist", "one.json", "four.json", "--preset", "hk", "--verify"], t.path());
    assert_eq!(code, 0);
    assert!((value(&out) - 1.0).abs() < 1e-9, "{out}");
    let rec: Value = serde_json::from_str(&out).unwrap();
    for key in ["value", "preset", "a", "gamma", "cross_dist", "breakdown", "diagnostics", "version"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
    assert_eq!(rec["preset"], "hk");
    assert_eq!(rec["a"], 0.5);
}

#[test]
fn dist_matches_golden_file_and_is_deterministic() {
    let d = data();
    let args = ["dist", "tri.json", "pair.json", "--preset", "ghk", "--seed", "7"];
    let (code, first, _) = etdist(&args, &d);
    assert_eq!(code, 0);
    let (_, second, _) = etdist(&args, &d);
    assert_eq!(first, second);
    let golden = fs::read_to_string(d.join("golden_ghk.json")).unwrap();
    assert_eq!(first, golden);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let d = data();
    let (_, out, _) = etdist(&["dist", "tri.json", "pair.json", "--preset", "bl"], &d);
    let v: Value = serde_json::from_str(&out).unwrap();
    let text = v["a"].to_string();
    assert_eq!(text, "1.0");
    assert!(out.contains("\"a\":1.0000000000000000e0"), "{out}");
}

#[test]
fn infinite_values_are_spelled_out() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "one.json", r#"{"dist": [[0]], "mass": [1]}"#);
    write(t.path(), "two.json", r#"{"dist": [[0]], "mass": [2]}"#);
    let (code, out, _) = etdist(&["dist", "one.json", "two.json", "--preset", "wp:2", "--verify"], t.path());
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["value"], "inf");
}

#[test]
fn validation_errors_exit_with_one() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "ok.json", r#"{"dist": [[0, 1], [1, 0]], "mass": [1, 1]}"#);
    write(t.path(), "other.json", r#"{"dist": [[0, 2], [2, 0]], "mass": [1, 1]}"#);
    write(t.path(), "bent.json", r#"{"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "mass": [1, 1, 1]}"#);
    write(t.path(), "junk.json", "not json");
    for args in [
        vec!["dist", "ok.json", "missing.json"],
        vec!["dist", "ok.json", "bent.json"],
        vec!["dist", "ok.json", "junk.json"],
        vec!["dist", "ok.json", "other.json", "--mode", "measure"],
        vec!["dist", "ok.json", "ok.json", "--tol", "-1"],
        vec!["dist", "ok.json", "ok.json", "--preset", "qpl:7"],
        vec!["check", "nonsense"],
    ] {
        let (code, out, err) = etdist(&args, t.path());
        assert_eq!(code, 1, "{args:?}: {err}");
        assert!(out.is_empty(), "{args:?}");
        assert!(!err.is_empty(), "{args:?}");
    }
    let (_, _, err) = etdist(&["dist", "ok.json", "bent.json"], t.path());
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["code"], 1);
    assert!(v["error"]["message"].as_str().unwrap().contains("bent.json"));
}

#[test]
fn gram_of_copies_is_zero_and_symmetric() {
    let t = tempfile::tempdir().unwrap();
    let space = r#"{"points": [[0, 0], [1, 0.5], [0.2, 0.9]], "metric": "euclidean", "mass": [1, 0.5, 2]}"#;
    for name in ["x.json", "y.json", "z.json"] {
        write(t.path(), name, space);
    }
    let (code, out, err) = etdist(&["gram", ".", "--jobs", "2"], t.path());
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["labels"], serde_json::json!(["x", "y", "z"]));
    for row in v["matrix"].as_array().unwrap() {
        for cell in row.as_array().unwrap() {
            assert!(cell.as_f64().unwrap().abs() <= 1e-6);
        }
    }
}

#[test]
fn gram_of_two_diracs() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "b.json", r#"{"dist": [[0]], "mass": [4]}"#);
    write(t.path(), "a.json", r#"{"dist": [[0]], "mass": [1]}"#);
    write(t.path(), "notes.txt", "ignored");
    let (code, out, _) = etdist(&["gram", ".", "--preset", "hk"], t.path());
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["labels"], serde_json::json!(["a", "b"]));
    let m = &v["matrix"];
    assert!((m[0][1].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(m[0][1], m[1][0]);
    assert_eq!(m[0][0], 0.0);
}

#[test]
fn gram_records_failed_pairs_and_continues() {
    let t = tempfile::tempdir().unwrap();
    let pts: Vec<String> = (0..9).map(|k| format!("[{k}]")).collect();
    let big = format!(r#"{{"points": [{}], "metric": "euclidean", "mass": [{}]}}"#, pts.join(","), vec!["1"; 9].join(","));
    write(t.path(), "big.json", &big);
    write(t.path(), "dirac.json", r#"{"dist": [[0]], "mass": [1]}"#);
    let (code, out, _) = etdist(&["gram", ".", "--preset", "pl:1", "--errors", "failed.json"], t.path());
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    // big x big exceeds the enumeration limit; the other pairs go through.
    assert!(v["matrix"][0][0].is_null());
    assert!(v["matrix"][0][1].is_number() && v["matrix"][1][1].is_number());
    let errors: Value = serde_json::from_str(&fs::read_to_string(t.path().join("failed.json")).unwrap()).unwrap();
    let errors = errors.as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["a"], "big");
    assert!(errors[0]["error"].as_str().unwrap().contains("size guard"));
}

#[test]
fn gram_needs_two_files() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "a.json", r#"{"dist": [[0]], "mass": [1]}"#);
    assert_eq!(etdist(&["gram", "."], t.path()).0, 1);
}

#[test]
fn check_reports_margins() {
    let (code, out, _) = etdist(&["check", "1"], &data());
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], true);
    let c = &v["checks"][0];
    assert_eq!(c["id"], 1);
    assert!(c["worst_margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(c["cases"], 800);
}

#[test]
fn failing_checks_exit_with_three() {
    // A single large epsilon leaves the scaling iterations far from the
    // unregularized optimum.
    let (code, out, err) = etdist(&["check", "13", "--epsilon-schedule", "0.5"], &data());
    assert_eq!(code, 3, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], false);
    assert!(v["checks"][0]["worst_margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn logs_go_to_stderr_only() {
    let d = data();
    let out = Command::new(env!("CARGO_BIN_EXE_etdist"))
        .args(["dist", "tri.json", "pair.json", "--verify"])
        .current_dir(&d)
        .env("ET_LOG", "info")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str::<Value>(&stdout).unwrap();
    assert!(String::from_utf8(out.stderr).unwrap().contains("record verified"));
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = etdist(&["--help"], &data());
    assert_eq!(code, 0);
    for cmd in ["dist", "gram", "check"] {
        assert!(out.contains(cmd));
    }
}
