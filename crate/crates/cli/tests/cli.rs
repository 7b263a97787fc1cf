use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use narrowflux::asymptotics::sphere_drop_neumann;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_narrowflux"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_pair_drop_matches_library() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["drop", "--eps", "0.1", "--l", "2", "--method", "asym3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = d.path().join("drop.csv");
    assert_eq!(
        header(&file),
        ["index", "eps", "l", "n_windows", "method", "value", "leading", "log_term", "quad_term", "error_estimate"]
    );
    let rows = csv_rows(&file);
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0][5].parse().unwrap();
    assert_eq!(v, sphere_drop_neumann(0.1, 2.0).unwrap().total);
    assert!((v - 0.21594).abs() < 1e-4);
    let m = json(&d.path().join("manifest.json"));
    assert_eq!(m["command"], "drop");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["args"].as_array().unwrap().iter().all(|a| a != "--out"));
}

#[test]
fn sweep_rows_follow_sweep_order_and_oracles_are_written() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["drop", "--eps", "0.1,0.05,0.02", "--l", "2", "--exit", "absorbing", "--method", "asym3,linsys"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&d.path().join("drop.csv"));
    let eps: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(eps, ["0.1", "0.1", "0.05", "0.05", "0.02", "0.02"]);
    let methods: Vec<&str> = rows.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(methods, ["asym3", "linsys", "asym3", "linsys", "asym3", "linsys"]);
    let oracle = json(&d.path().join("oracle.json"));
    let oracle = oracle.as_array().unwrap();
    assert_eq!(oracle.len(), 3);
    // Truncated kernels reproduce the pair expansion.
    assert!(oracle.iter().all(|r| r["re_percent"].as_f64().unwrap().abs() < 1e-9));
}

#[test]
fn config_file_with_four_exits() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"domain": {"type": "unit_sphere"}, "current": 1.0, "diffusion": 1.0, "windows": [
            {"center": [0, 0, 1], "radius": 0.05, "role": "influx"},
            {"center": [0, 0, -1], "radius": 0.05, "role": "absorbing"},
            {"center": {"colatitude": 1.5707963267948966, "azimuth": 0.0}, "radius": 0.05, "role": "absorbing"},
            {"center": {"colatitude": 1.5707963267948966, "azimuth": 3.141592653589793}, "radius": 0.05, "role": "absorbing"}
        ]}"#,
    )
    .unwrap();
    let out = d.path().join("out");
    let o = run(&out, &["flux", "--config", cfg.to_str().unwrap(), "--method", "asym,linsys"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("flux.csv"));
    assert_eq!(rows.len(), 6);
    let total: f64 = rows[..3].iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
    assert!((total + std::f64::consts::PI * 0.0025).abs() < 1e-15);
    let south: f64 = rows[0][4].parse().unwrap();
    let equator: f64 = rows[1][4].parse().unwrap();
    assert!(south.abs() < equator.abs());
}

#[test]
fn monte_carlo_split_is_seeded_and_thread_independent() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let cfg = d1.path().join("sym.json");
    fs::write(
        &cfg,
        r#"{"domain": {"type": "unit_sphere"}, "current": 1.0, "diffusion": 1.0, "windows": [
            {"center": [0, 0, 1], "radius": 0.2, "role": "influx"},
            {"center": [1, 0, 0], "radius": 0.2, "role": "absorbing"},
            {"center": [-1, 0, 0], "radius": 0.2, "role": "absorbing"}
        ]}"#,
    )
    .unwrap();
    let args = ["flux", "--config", cfg.to_str().unwrap(), "--method", "mc", "--particles", "1500", "--seed", "9"];
    let a = Command::new(env!("CARGO_BIN_EXE_narrowflux"))
        .args(args)
        .arg("--out")
        .arg(d1.path())
        .env("NARROWFLUX_THREADS", "1")
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_narrowflux"))
        .args(args)
        .arg("--out")
        .arg(d2.path())
        .env("NARROWFLUX_THREADS", "2")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    let fa = fs::read(d1.path().join("flux.csv")).unwrap();
    assert_eq!(fa, fs::read(d2.path().join("flux.csv")).unwrap());
    let rows = csv_rows(&d1.path().join("flux.csv"));
    let p: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    let se: f64 = rows[0][5].parse::<f64>().unwrap() / (std::f64::consts::PI * 0.04);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    assert!((p[0] - 0.5).abs() < 3.0 * se);
    assert_eq!(json(&d1.path().join("manifest.json"))["seed"], 9);
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["drop", "--eps", "0.05:0.1:3", "--method", "asym2,bem", "--mesh-level", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = d.path().join("again");
    let o = run(&again, &["rerun", d.path().join("manifest.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["drop.csv", "oracle.json"] {
        assert_eq!(fs::read(d.path().join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(&again.join("manifest.json"))["output"], again.to_str().unwrap());
}

#[test]
fn trace_fit_over_grid() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["trace", "--eps", "0.01,0.02,0.05,0.1", "--l", "0.1,0.2,0.3,0.4", "--fit"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&d.path().join("summary.json"));
    let summary = summary.as_array().unwrap();
    assert_eq!(summary.len(), 15);
    for key in ["eps", "l", "I", "bc", "L_pe", "T_tr", "terminal_x"] {
        assert!(summary[0].get(key).is_some(), "{key}");
    }
    assert_eq!(summary[0]["bc"], "neumann_pair");
    let fit = json(&d.path().join("fit.json"));
    assert!((fit["a"].as_f64().unwrap() - 0.861).abs() < 0.05 * 0.861);
    let first = d.path().join(summary[0]["file"].as_str().unwrap());
    assert_eq!(header(&first), ["t", "x", "z"]);
    let pts = csv_rows(&first);
    assert_eq!(pts[0][2].parse::<f64>().unwrap(), 0.0);
    assert!(pts.iter().all(|r| r[2].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn exit_codes_follow_error_classes() {
    let d = tempfile::tempdir().unwrap();
    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(run(d.path(), &["--help"])), 0);
    assert_eq!(code(run(d.path(), &["drop", "--bogus"])), 1);
    assert_eq!(code(run(d.path(), &["drop", "--eps", "0.3", "--l", "0.4"])), 1);
    assert_eq!(code(run(d.path(), &["drop"])), 1);
    assert_eq!(code(run(d.path(), &["flux", "--eps", "0.1"])), 0);
    assert_eq!(code(run(d.path(), &["drop", "--config", "/nonexistent/cfg.json"])), 3);
    assert_eq!(code(run(d.path(), &["trace", "--eps", "0.05", "--l", "0.2", "--max-time", "1"])), 2);
    let bad = d.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(code(run(d.path(), &["drop", "--config", bad.to_str().unwrap()])), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_narrowflux"))
        .args(["drop", "--eps", "0.1"])
        .env("NARROWFLUX_THREADS", "zero")
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(code(o), 1);
}
