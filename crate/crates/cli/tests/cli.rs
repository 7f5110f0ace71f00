use std::process::{Command, Output};

use gnn_core::lut::{build_lut, LutKind, LutTable};
use gnn_core::QFormat;

fn gnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnn"))
        .args(args)
        .output()
        .expect("spawn gnn")
}

fn assert_fails(out: &Output) {
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_and_missing_files_fail() {
    assert_fails(&gnn(&["train", "--bogus"]));
    assert_fails(&gnn(&["train", "--config", "/nonexistent/run.cfg"]));
    assert_fails(&gnn(&["eval", "--model", "/nonexistent/m.gnn", "--data", "x.csv"]));
    assert_fails(&gnn(&["frobnicate"]));
}

#[test]
fn bad_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "input_dim = 2\nhidden_dims = 3\noutput_dim = 2\nlearning = 1\n").unwrap();
    let out = gnn(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_fails(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning"));
}

#[test]
fn gen_lut_writes_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tanh.lut");
    let out = gnn(&[
        "gen-lut", "--kind", "tanh", "--bits", "16,14", "--range", "-8,8", "--n", "256", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&path).unwrap();
    let expected = build_lut(LutKind::Tanh, QFormat::Q2_14, -8.0, 8.0, 256).unwrap();
    assert_eq!(bytes, expected.to_bytes());
    assert_eq!(LutTable::from_bytes(&bytes).unwrap(), expected);
    assert_eq!(bytes.len(), 4 + 4 + 16 + 4 + 256 * 2);
}

#[test]
fn gen_lut_rejects_bad_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.lut");
    assert_fails(&gnn(&[
        "gen-lut", "--kind", "tanh", "--bits", "16,14", "--range", "-8,8", "--n", "1000", "--out",
        path.to_str().unwrap(),
    ]));
}

#[test]
fn trace_prints_every_layer() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let cfg = format!("{dir}/../../fixtures/xor.cfg");
    let out = gnn(&["trace", "--config", &cfg, "--sample", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let labels: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(labels, ["x", "S1", "M1", "z", "yhat", "cycles"]);
    assert!(text.starts_with("x\t1,0\n"));
    assert_fails(&gnn(&["trace", "--config", &cfg, "--sample", "4"]));
}
