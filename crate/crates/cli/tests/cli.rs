use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gsmatrix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmatrix"))
        .args(args)
        .current_dir(dir)
        .env_remove("GS_DEFAULTS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap().strip_prefix("# config_hash=").unwrap().to_owned();
    lines.next();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (hash, rows)
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str::<Value>(text.trim()).unwrap()["error"].clone()
}

#[test]
fn free_smatrix_reports_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("free.toml"), "out = \"res\"\n[potential]\nbumps = []\n").unwrap();
    let out = gsmatrix(dir.path(), &["smatrix", "--config", "free.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("res/smatrix.json"));
    let run = &doc["runs"][0];
    assert!(run["max_deviation_from_input"].as_f64().unwrap() <= 1e-8);
    assert!(run["identity"]["gamma_diff"].as_f64().unwrap() < 1e-12);
    assert_eq!(run["delta1"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["correspondence"]["passed"], Value::Bool(true));
}

#[test]
fn scatmap_row_count_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmatrix(dir.path(), &["scatmap", "--grid", "64", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let (hash, rows) = csv_rows(&dir.path().join("o/scatmap.csv"));
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.len() == 4));
    let doc = json(&dir.path().join("o/scatmap.json"));
    assert_eq!(doc["config_hash"].as_str().unwrap(), hash);
    // Symmetric impact parameters deflect to mirror angles.
    let (a, b) = (&rows[10], &rows[53]);
    assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-9);
}

#[test]
fn oracle_compare_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmatrix(dir.path(), &["oracle-compare", "--h", "0.1", "--h", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&dir.path().join("out/oracle-compare.csv"));
    let ratio = rows[0][1] / rows[1][1];
    assert!((1.25..=1.6).contains(&ratio), "{ratio}");
    let snap = std::fs::read(dir.path().join("out/oracle_snapshot_0.bin")).unwrap();
    let (u, t) = gsmatrix::oracle::read_snapshot(snap.as_slice()).unwrap();
    assert_eq!((u.grid.n, t), (4096, 8.0));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = gsmatrix(dir.path(), &["smatrix", "--out", out, "--h", "0.05", "--h", "0.02"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a/smatrix.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/smatrix.json")).unwrap();
    // The output directory is part of the configuration, hence of the hash.
    let strip = |v: &[u8]| {
        let mut doc: Value = serde_json::from_slice(v).unwrap();
        doc.as_object_mut().unwrap().remove("config_hash");
        doc
    };
    assert_eq!(strip(&a), strip(&b));
    let o = gsmatrix(dir.path(), &["smatrix", "--out", "a", "--h", "0.05", "--h", "0.02"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.path().join("a/smatrix.json")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"delta1\": "));
    assert!(text.contains("e-2,") || text.contains("e-2\n"), "h written with an exponent");
}

#[test]
fn written_config_reproduces_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gsmatrix(dir.path(), &["propagate", "--h", "0.03"]).status.code(), Some(0));
    let first = json(&dir.path().join("out/propagate.json"));
    std::fs::rename(dir.path().join("out/config.toml"), dir.path().join("saved.toml")).unwrap();
    assert_eq!(gsmatrix(dir.path(), &["propagate", "--config", "saved.toml"]).status.code(), Some(0));
    let second = json(&dir.path().join("out/propagate.json"));
    assert_eq!(first, second);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "h = [-0.1]\n").unwrap();
    let out = gsmatrix(dir.path(), &["propagate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "InvalidConfig");
    assert_eq!(err["exit_code"], 2);

    std::fs::write(dir.path().join("typo.toml"), "[state]\nx_0 = [1.0, 0.0]\n").unwrap();
    assert_eq!(gsmatrix(dir.path(), &["smatrix", "--config", "typo.toml"]).status.code(), Some(2));

    std::fs::write(dir.path().join("offshell.toml"), "[state]\nxi0 = [0.5, 0.0]\n").unwrap();
    let out = gsmatrix(dir.path(), &["smatrix", "--config", "offshell.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "OffShell");

    let out = gsmatrix(dir.path(), &["resolve", "--dim", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "InvalidArgument");

    let out = gsmatrix(dir.path(), &["smatrix", "--dim", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "Usage");
    assert_eq!(gsmatrix(dir.path(), &["nonsense"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), "[oracle]\nhalf_width = 6.0\nn = 1024\n").unwrap();
    let out = gsmatrix(dir.path(), &["oracle-compare", "--config", "small.toml", "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["kind"], "BoxTooSmall");
}

#[test]
fn alternate_defaults_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("alt.toml"), "[scatmap]\nrows = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gsmatrix"))
        .args(["scatmap"])
        .current_dir(dir.path())
        .env("GS_DEFAULTS", dir.path().join("alt.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("out/scatmap.csv")).1.len(), 5);
}

#[test]
fn three_dimensional_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmatrix(dir.path(), &["smatrix", "--dim", "3", "--grid", "400"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("out/smatrix.json"));
    assert_eq!(doc["runs"][0]["xi1"].as_array().unwrap().len(), 3);
    assert_eq!(doc["correspondence"]["passed"], Value::Bool(true));
    assert_eq!(gsmatrix(dir.path(), &["scatmap", "--dim", "3", "--grid", "8"]).status.code(), Some(0));
    assert_eq!(gsmatrix(dir.path(), &["farfield", "--dim", "3"]).status.code(), Some(0));
}

#[test]
fn eigenfun_and_resolve_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmatrix(dir.path(), &["eigenfun", "--h", "0.2", "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&dir.path().join("out/eigenfun.json"));
    let r = doc["scaled_ratios"][0].as_f64().unwrap();
    assert!((r - 1.41).abs() <= 0.25, "{r}");
    let out = gsmatrix(dir.path(), &["resolve", "--h", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = csv_rows(&dir.path().join("out/resolve.csv"));
    assert!(rows[0][3] <= 0.02 && rows[0][4] <= 0.02);
}
