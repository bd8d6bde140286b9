use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gradgraph"))
}

fn run_with_stdin(args: &[&str], config: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(config.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn close(v: &serde_json::Value, key: &str, expected: f64) {
    let got = v[key].as_f64().unwrap_or_else(|| panic!("missing {key} in {v}"));
    assert!((got - expected).abs() < 1e-12, "{key} = {got}, expected {expected}");
}

#[test]
fn calibrate_special_lagrangian_identity() {
    let out = run_with_stdin(
        &["calibrate", "--config", "-", "--format", "json"],
        r#"{"tau": "pi/2", "f_inf": 1.5707963267948966, "lam1": 1}"#,
    );
    let v = json(&out);
    close(&v, "lam2", 1.0);
    close(&v, "P11", 1.0);
    close(&v, "P12", 0.0);
    close(&v, "P22", 1.0);
    assert_eq!(v["branch"], "SPL");
}

#[test]
fn calibrate_monge_ampere_p_equals_a() {
    let out = run_with_stdin(
        &["calibrate", "--config", "-", "--format", "json"],
        r#"{"tau": 0, "f_inf": 0, "lam1": 4}"#,
    );
    let v = json(&out);
    close(&v, "lam2", 0.25);
    close(&v, "P11", 4.0);
    close(&v, "P22", 0.25);
}

#[test]
fn calibrate_out_of_range_exits_two() {
    let out = run_with_stdin(&["calibrate", "--config", "-"], r#"{"tau": "pi/4", "f_inf": 0.1}"#);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("OUT_OF_RANGE") && err.contains("(-inf, 0)"), "{err}");
}

#[test]
fn bad_config_exits_two() {
    let out = run_with_stdin(&["calibrate", "--config", "-"], r#"{"tua": 1}"#);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CONFIG"));
    let out = run_with_stdin(&["calibrate", "--config", "-"], r#"{"tau": "pi/0"}"#);
    assert_eq!(out.status.code(), Some(2));
    let out = run_with_stdin(&["calibrate", "--config", "-"], r#"{"tau": 2.0}"#);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OUT_OF_RANGE"));
}

#[test]
fn help_documents_defaults() {
    let out = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["tau", "grid", "n_steps: 20000", "window", "Exit codes"] {
        assert!(text.contains(key), "help lacks {key}");
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn poisson_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"grid": {"r_min": 2, "r_max": 200, "n_r": 64, "n_theta": 16}, "source": {"power": 4, "harmonic": 1}}"#,
    );
    let a = bin().args(["poisson", "--config", &cfg]).output().unwrap();
    let b = bin().args(["poisson", "--config", &cfg]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("r,theta,value\n"));
    assert_eq!(text.lines().count(), 1 + 64 * 16);
    let out = bin()
        .args(["poisson", "--config", &cfg, "--format", "json"])
        .output()
        .unwrap();
    let v = json(&out);
    assert!((v["k1"].as_f64().unwrap() - 4.0).abs() < 0.1);
}

#[test]
fn radial_then_extract() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.csv");
    let cfg = write(
        dir.path(),
        "r.json",
        &format!(
            r#"{{"tau": "pi/2", "f_inf": 1.5707963267948966, "rhs": {{"amp": 0.2, "zeta": 2.5}},
                "radial": {{"r_max": 1e5, "n_steps": 20000}}, "window": [1000, 100000],
                "input": "{}"}}"#,
            profile.display()
        ),
    );
    let out = bin()
        .args(["radial", "--config", &cfg, "--out", profile.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(
        &bin()
            .args(["extract", "--config", &cfg, "--format", "json"])
            .output()
            .unwrap(),
    );
    assert!((v["residual_p"].as_f64().unwrap() - 0.5).abs() < 0.1);
    assert_eq!(v["residual_q"].as_f64().unwrap(), 0.0);
    assert!(v["d1"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn manufacture_then_extract() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("u.csv");
    let cfg = write(
        dir.path(),
        "m.json",
        &format!(
            r#"{{"tau": "pi/2", "coefficients": {{"A": [1, 0, 2], "c": 1, "d": 0.3, "d1": 0.1, "d2": -0.2}},
                "grid": {{"r_min": 100, "r_max": 10000, "n_r": 96, "n_theta": 32}},
                "samples": "{0}", "input": "{0}", "window": [100, 10000]}}"#,
            samples.display()
        ),
    );
    let f = dir.path().join("f.csv");
    let out = bin()
        .args(["manufacture", "--config", &cfg, "--out", f.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&f).unwrap().starts_with("r,theta,value"));
    let v = json(
        &bin()
            .args(["extract", "--config", &cfg, "--format", "json"])
            .output()
            .unwrap(),
    );
    for (key, want) in [
        ("A11", 1.0),
        ("A22", 2.0),
        ("c", 1.0),
        ("d", 0.3),
        ("d1", 0.1),
        ("d2", -0.2),
    ] {
        let got = v[key].as_f64().unwrap();
        assert!((got - want).abs() < 1e-3 * want.abs(), "{key} = {got}");
    }
}

#[test]
fn verify_suite_single_check() {
    let out = bin()
        .args(["verify-suite", "--only", "p-identity", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("check,row,expected,observed,tolerance,pass\np-identity,"));
    let out = bin().args(["verify-suite", "--only", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UNKNOWN_CHECK"));
}
