//! Black-box runs of the `dei` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/panel.csv")
}

fn dei(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dei"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) {
    let out = dei(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_panel_exits_with_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let out = dei(&["build-index", "--panel", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
}

#[test]
fn bad_config_value_is_an_ordinary_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dei(&["build-index", "--out", dir.path().to_str().unwrap(), "--set", "eps_min=2.0"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn every_output_starts_with_its_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let panel = fixture();
    run_ok(&["transform", "--panel", panel.to_str().unwrap(), "--out", d]);
    let mut seen = Vec::new();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let first = text.lines().next().unwrap();
                assert!(first.starts_with("# config-sha256 "), "{}: {first}", path.display());
                let hash = first.split_whitespace().nth(2).unwrap();
                assert_eq!(hash.len(), 64);
                assert!(hash.bytes().all(|b| b.is_ascii_hexdigit()));
            }
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert!(v["config_sha256"].as_str().is_some_and(|h| h.len() == 64), "{}", path.display());
            }
            _ => continue,
        }
        seen.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    seen.sort();
    assert_eq!(seen, ["config.json", "transform.csv", "transform.json"]);
}

#[test]
fn both_criteria_are_recorded_in_the_fit_table() {
    let panel = fixture();
    let mut tables = Vec::new();
    for criterion in ["aic", "bic"] {
        let dir = tempfile::tempdir().unwrap();
        run_ok(&["fit", "--panel", panel.to_str().unwrap(), "--criterion", criterion, "--out", dir.path().to_str().unwrap()]);
        let text = fs::read_to_string(dir.path().join("criteria.csv")).unwrap();
        assert!(text.contains(&format!("# selected = lowest {criterion}")));
        let body: Vec<String> = text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect();
        assert_eq!(body[0], "country,innovation,family,k,log_likelihood,aic,bic,selected");
        tables.push(body);
    }
    // Same fits, so every column but the selection flag agrees.
    let strip = |rows: &[String]| -> Vec<String> {
        rows.iter().map(|r| r.rsplit_once(',').map_or(r.clone(), |(head, _)| head.to_string())).collect()
    };
    assert_eq!(strip(&tables[0]), strip(&tables[1]));
}
