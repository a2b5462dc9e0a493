use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const G1: &str = r#""geometry": { "ell1": 0.1, "ell2": 0.3, "L0": 1.0 }"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, format!("{{ {G1}{body} }}")).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_movwave"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    v["error"].clone()
}

#[test]
fn geometry_reports_sharp_times() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let o = run("geometry", &cfg, tmp.path(), &[]);
    assert!(o.status.success());
    let g = read_json(&tmp.path().join("geometry.json"));
    let t1 = g["constants"]["T_obs1"].as_f64().unwrap();
    assert!((t1 - 200.0 / 63.0).abs() < 1e-14);
    assert!(format!("{t1}").starts_with("3.1746031746"));
    assert!((g["constants"]["T_obs2"].as_f64().unwrap() - 10.0 / 7.0).abs() < 1e-14);
    assert_eq!(g["meta"]["command"], "geometry");
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, g);
}

#[test]
fn observe_on_zero_data_passes_with_zero_residuals() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#", "data": { "preset": { "kind": "zero" } }, "N": 4"#);
    let o = run("observe", &cfg, tmp.path(), &["--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&tmp.path().join("observe.json"));
    assert_eq!(r["passed"], true);
    let all: Vec<&Value> =
        r["one_endpoint"].as_array().unwrap().iter().chain(r["two_endpoint"].as_array().unwrap()).collect();
    assert_eq!(all.len(), 8);
    assert!(all.iter().all(|e| e["relative_residual"].as_f64() == Some(0.0)));
}

#[test]
fn observe_assert_flags_two_endpoint_mismatch() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "random_modes", "modes": 3 } }, "seed": 7, "N": 8"#,
    );
    let o = run("observe", &cfg, tmp.path(), &["--assert"]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_error(&o);
    assert_eq!(e["kind"], "assertion");
    let details = e["details"].as_array().unwrap();
    assert_eq!(details.len(), 1);
    assert!(details[0].as_str().unwrap().starts_with("two endpoints M = 2"));
    let r = read_json(&tmp.path().join("observe.json"));
    for rep in r["one_endpoint"].as_array().unwrap() {
        assert!(rep["relative_residual"].as_f64().unwrap() < 1e-7);
    }
    assert!(run("observe", &cfg, tmp.path(), &[]).status.success());
}

#[test]
fn compare_oracle_sine_bump() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "sine_bump", "power": 6 } }, "N": 64, "compare_oracle": { "nt": 64, "nx": 64 }"#,
    );
    let o = run("compare-oracle", &cfg, tmp.path(), &["--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&tmp.path().join("compare_oracle.json"));
    assert!(r["max_abs_difference"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["points"], 4096);
}

#[test]
fn solve_writes_field_csv_with_metadata() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "sine_bump" } }, "N": 16, "solve": { "nt": 3, "nx": 5 }"#,
    );
    assert!(run("solve", &cfg, tmp.path(), &[]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,t,phi,phi_x,phi_t"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    for cell in rows[7].split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
    let meta = read_json(&tmp.path().join("field.meta.json"));
    assert_eq!(meta["rows"], 15);
    assert_eq!(meta["columns"][4], "phi_t");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    let coeffs = read_json(&tmp.path().join("coefficients.json"));
    assert_eq!(coeffs["N"], 16);
    assert_eq!(coeffs["c"].as_array().unwrap().len(), 32);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "random_modes" } }, "seed": 3, "N": 6, "solve": { "nt": 8, "nx": 8 }, "energy_scan": { "count": 5 }"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for cmd in ["solve", "energy-scan", "observe"] {
        assert!(run(cmd, &cfg, &a, &[]).status.success());
        assert!(run(cmd, &cfg, &b, &["--threads", "1"]).status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_changes_random_data_and_hash() {
    let tmp = TempDir::new().unwrap();
    let mut hashes = Vec::new();
    let mut sums = Vec::new();
    for seed in [1, 2] {
        let dir = tmp.path().join(format!("s{seed}"));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = write_config(
            &dir,
            &format!(r#", "data": {{ "preset": {{ "kind": "random_modes" }} }}, "seed": {seed}, "N": 4"#),
        );
        assert!(run("solve", &cfg, &dir, &["--threads", "1"]).status.success());
        let r = read_json(&dir.join("solve.json"));
        hashes.push(r["meta"]["config_sha256"].clone());
        sums.push(r["S"].as_f64().unwrap());
    }
    assert_ne!(hashes[0], hashes[1]);
    assert_ne!(sums[0], sums[1]);
}

#[test]
fn energy_scan_csv_and_assert() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "sine_bump", "velocity": 0.3 } }, "N": 32, "energy_scan": { "times": [2.5, 5.0, 25.0] }"#,
    );
    assert!(run("energy-scan", &cfg, tmp.path(), &["--assert"]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("energy.csv")).unwrap();
    assert!(text.starts_with("t,E,tE,S,lower,upper,residual\n"));
    assert_eq!(text.lines().count(), 4);
    let r = read_json(&tmp.path().join("energy_scan.json"));
    assert!(r["max_relative_residual"].as_f64().unwrap() < 1e-7);
}

#[test]
fn counterexample_traces_are_silent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#", "counterexample": { "mode": "two_endpoint", "samples": 400 }"#);
    let o = run("counterexample", &cfg, tmp.path(), &["--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("traces.csv")).unwrap();
    assert!(text.starts_with("t,trace_left,trace_right,predicted_left,predicted_right\n"));
    assert_eq!(text.lines().count(), 401);
    let r = read_json(&tmp.path().join("counterexample.json"));
    assert_eq!(r["silence"].as_array().unwrap().len(), 2);
    assert_eq!(r["resolved"], true);
}

#[test]
fn one_endpoint_counterexample_leaves_left_prediction_empty() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#", "counterexample": { "N": 256, "samples": 10, "tolerance": 1.0 }"#);
    assert!(run("counterexample", &cfg, tmp.path(), &[]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("traces.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(3).unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    assert_eq!(row[3], "");
    assert!(!row[4].is_empty());
}

#[test]
fn control_synthesis_steers_to_rest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "sine_bump", "velocity": 0.3 } }, "control": { "nodes": 256, "control_samples": 512 }"#,
    );
    let o = run("control", &cfg, tmp.path(), &["--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&tmp.path().join("control.json"));
    assert_eq!(r["converged"], true);
    assert!(r["null_control"]["terminal_energy_ratio"].as_f64().unwrap() < 1e-4);
    assert!(r["log"].as_array().unwrap().len() <= 200);
    let text = std::fs::read_to_string(tmp.path().join("control_right.csv")).unwrap();
    assert!(text.starts_with("t,v\n"));
    assert_eq!(text.lines().count(), 513);
    assert!(!tmp.path().join("control_left.csv").exists());
}

#[test]
fn control_without_convergence_is_a_numeric_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "sine_bump" } }, "control": { "horizon": 1.5, "nodes": 64, "max_iter": 2, "control_samples": 16 }"#,
    );
    let o = run("control", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_error(&o)["kind"], "numeric");
    assert!(tmp.path().join("control.json").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    for (body, needle) in [
        (r#", "bogus": 1"#, "bogus"),
        (r#", "solve": { "nt": 4, "ny": 3 }"#, "ny"),
        (r#", "data": { "preset": { "kind": "sine_bump", "pow": 2 } }"#, "/data"),
        (r#", "control": { "mode": "three_endpoint" }"#, "three_endpoint"),
        (r#", "N": -1"#, "/N"),
    ] {
        let cfg = write_config(tmp.path(), body);
        let o = run("geometry", &cfg, tmp.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let e = stderr_error(&o);
        assert_eq!(e["kind"], "config");
        assert!(e.to_string().contains(needle), "{body}: {e}");
    }
    let path = tmp.path().join("bad_geometry.json");
    std::fs::write(&path, r#"{ "geometry": { "ell1": 0.0, "ell2": 0.0, "L0": 1.0 } }"#).unwrap();
    let o = run("geometry", &path, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_error(&o)["message"].as_str().unwrap().contains("ell1 + ell2"));
    let o = run("geometry", &tmp.path().join("missing.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_movwave")).arg("geometry").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_movwave"))
        .arg("solve")
        .arg("--config")
        .arg(&path)
        .arg("--threads")
        .arg("0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_initial_data() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (-0.25f64, 0.75f64);
    let n = 401;
    let xs: Vec<f64> = (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect();
    let bump = |x: f64| (std::f64::consts::PI * (x - a)).sin().powi(6);
    let mut p0 = String::from("x,value\n");
    let mut p1 = String::from("x,value\n");
    for &x in &xs {
        p0.push_str(&format!("{x:.17e},{:.17e}\n", bump(x)));
        p1.push_str(&format!("{x:.17e},0\n"));
    }
    std::fs::write(tmp.path().join("phi0.csv"), p0).unwrap();
    std::fs::write(tmp.path().join("phi1.csv"), p1).unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "csv": { "phi0": "phi0.csv", "phi1": "phi1.csv" } }, "N": 32, "compare_oracle": { "nt": 8, "nx": 8, "tolerance": 1e-5 }"#,
    );
    let o = run("compare-oracle", &cfg, tmp.path(), &["--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(tmp.path().join("phi1.csv"), "x,value\n0,0\n0.5,0\n").unwrap();
    let o = run("solve", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_error(&o)["message"].as_str().unwrap().contains("same x column"));
}

#[test]
fn data_needs_exactly_one_source() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#", "data": { "preset": { "kind": "zero" }, "csv": { "phi0": "a.csv", "phi1": "b.csv" } }"#,
    );
    assert_eq!(run("solve", &cfg, tmp.path(), &[]).status.code(), Some(2));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let tmp = TempDir::new().unwrap();
        let o = run("geometry", &path, tmp.path(), &[]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        count += 1;
    }
    assert!(count >= 4);
}
