use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rtpool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtpool"))
        .args(args)
        .output()
        .expect("spawn rtpool")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fixture_validates_cleanly() {
    let out = rtpool(&["validate", "--fixture"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cocircular_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("square.jsonl");
    fs::write(
        &data,
        r#"{"coords":[[1,0],[0,1],[-1,0],[0,-1],[0.1,0.2]],"edges":[[0,1],[1,2],[2,3],[3,4]],"features":[[1],[1],[1],[1],[1]],"label":0}"#,
    )
    .unwrap();
    assert_eq!(code(&rtpool(&["validate", "--dataset", s(&data)])), 2);
    let out = dir.path().join("build");
    assert_eq!(code(&rtpool(&["build", "--dataset", s(&data), "--out", s(&out)])), 2);
}

#[test]
fn malformed_dataset_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.jsonl");
    fs::write(&data, "{\"edges\": [[0, 9]], \"features\": [[1]], \"label\": 0}\n").unwrap();
    let out = dir.path().join("build");
    assert_eq!(code(&rtpool(&["build", "--dataset", s(&data), "--out", s(&out)])), 2);
}

#[test]
fn theorem_counterexamples_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.jsonl");
    let out = rtpool(&[
        "validate", "--synthetic", "10", "--seed", "2004", "--slice-max-order", "2",
        "--report", s(&report),
    ]);
    assert_eq!(code(&out), 1);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.lines().any(|l| l.contains("\"counterexample\"")));
}

#[test]
fn synth_build_export_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.jsonl");
    let build = dir.path().join("build");
    let ok = |args: &[&str]| {
        let out = rtpool(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["synth", "--graphs", "6", "--points", "7", "--out", s(&data)]);
    ok(&["build", "--dataset", s(&data), "--out", s(&build)]);
    assert!(build.join("manifest.json").exists());

    let ex = dir.path().join("ex");
    ok(&["export", "--build", s(&build), "--artifact", "2", "--kind", "tiling", "--out", s(&ex)]);
    assert!(fs::read_dir(&ex).unwrap().count() > 0);

    let missing = rtpool(&[
        "export", "--build", s(&build), "--artifact", "99", "--kind", "tiling", "--out", s(&ex),
    ]);
    assert_eq!(code(&missing), 2);
}
