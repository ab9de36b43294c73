use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spherefac"))
}

fn run(args: &[&str], threads: Option<&str>) -> i32 {
    let mut c = bin();
    c.args(args);
    if let Some(t) = threads {
        c.env("SPHEREFAC_THREADS", t);
    }
    c.output().unwrap().status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(dir: &Path) -> usize {
    let mut r = csv::Reader::from_path(dir.join("samples.csv")).unwrap();
    r.records().count()
}

#[test]
fn identity_factorization_exits_zero_with_no_factors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "id.json",
        r#"{"map": {"name": "identity"}, "eps": 0.5}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        run(
            &[
                "factorize",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--samples",
                "50"
            ],
            None
        ),
        0
    );
    let r = report(&out);
    assert_eq!(r["factor_count"], 0);
    assert_eq!(r["certificates"].as_array().unwrap().len(), 0);
    assert_eq!(r["wall_time"], Value::Null);
    assert_eq!(csv_rows(&out), 50);
}

#[test]
fn twist_reports_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["factorize", "--seed", "7", "--out", o], Some("1")), 0);
    let first = fs::read(out.join("report.json")).unwrap();
    assert_eq!(run(&["factorize", "--seed", "7", "--out", o], Some("4")), 0);
    let second = fs::read(out.join("report.json")).unwrap();
    assert!(first == second);

    let r = report(&out);
    let c = &r["details"]["counts"];
    let total = c["j1"].as_u64().unwrap() + c["j2"].as_u64().unwrap() + c["j3"].as_u64().unwrap();
    assert_eq!(r["factor_count"].as_u64().unwrap(), total);
    assert_eq!(r["certificates"].as_array().unwrap().len() as u64, total);
    for key in [
        "command",
        "config",
        "certificates",
        "factor_count",
        "residual",
        "wall_time",
    ] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert!(r["residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(csv_rows(&out), 1000);
}

#[test]
fn spiral_report_carries_lower_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["spiral", "--out", out.to_str().unwrap()], None), 0);
    let r = report(&out);
    let b = &r["certificates"][0];
    assert!(b["lower_bound_n_ceil"].as_u64().unwrap() >= 4);
    assert!((b["lower_bound_n"].as_f64().unwrap() - 3.273).abs() < 1e-3);
    assert_eq!(b["L"].as_f64().unwrap(), 2.0);
}

#[test]
fn other_commands_succeed_and_honour_sample_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, samples, rows) in [
        ("certify", "300", 300),
        ("path-bounds", "20", 20),
        ("onedim", "777", 777),
    ] {
        let out = tmp.path().join(cmd);
        assert_eq!(
            run(
                &[cmd, "--samples", samples, "--out", out.to_str().unwrap()],
                None
            ),
            0,
            "{cmd}"
        );
        assert_eq!(csv_rows(&out), rows, "{cmd}");
        assert_eq!(report(&out)["command"], cmd);
    }
    assert_eq!(report(&tmp.path().join("onedim"))["factor_count"], 2);
}

#[test]
fn invalid_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let bad_eps = write_config(tmp.path(), "eps.json", r#"{"eps": 0.0}"#);
    assert_eq!(
        run(&["factorize", "--config", &bad_eps, "--out", o], None),
        2
    );
    let garbage = write_config(tmp.path(), "junk.json", "{not json");
    assert_eq!(
        run(&["factorize", "--config", &garbage, "--out", o], None),
        2
    );
    let low_dim = write_config(
        tmp.path(),
        "dim.json",
        r#"{"map": {"name": "identity", "dim": 1}}"#,
    );
    assert_eq!(run(&["certify", "--config", &low_dim, "--out", o], None), 2);
    let mismatch = write_config(tmp.path(), "cmd.json", r#"{"command": "spiral"}"#);
    assert_eq!(run(&["onedim", "--config", &mismatch, "--out", o], None), 2);
    assert_eq!(run(&["spiral", "--out", o], Some("zero")), 2);
    assert_eq!(
        run(
            &[
                "factorize",
                "--config",
                "/nonexistent/config.json",
                "--out",
                o
            ],
            None
        ),
        2
    );
}

#[test]
fn out_of_scope_maps_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let spiral = write_config(
        tmp.path(),
        "s.json",
        r#"{"map": {"name": "spiral", "k": 1.0}}"#,
    );
    assert_eq!(
        run(&["factorize", "--config", &spiral, "--out", o], None),
        3
    );
    let three = write_config(
        tmp.path(),
        "three.json",
        r#"{"pieces": [
            {"map": {"name": "twist", "amplitude": 0.2}, "center": [0.0, 1.0], "scale": 0.5},
            {"map": {"name": "twist", "amplitude": 0.2}, "center": [2.0, 1.0], "scale": 0.5},
            {"map": {"name": "twist", "amplitude": 0.2}, "center": [4.0, 1.0], "scale": 0.5}
        ]}"#,
    );
    let out_err = bin()
        .args(["factorize", "--config", &three, "--out", o])
        .output()
        .unwrap();
    assert_eq!(out_err.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out_err.stderr).contains("stage split"));
}

#[test]
fn unwritable_output_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(run(&["spiral", "--out", out.to_str().unwrap()], None), 4);
}
