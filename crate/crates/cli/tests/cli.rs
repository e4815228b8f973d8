use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use nonlocal_core::grid::{read_field, write_field, GridSpec};
use nonlocal_core::kernel::KernelSpec;
use nonlocal_core::norms::{ensemble_member, EnsembleConfig};
use nonlocal_core::solver_elliptic::elliptic_residual;
use nonlocal_core::symbol::{tabulate_symbol, SymbolQuadrature};

const FRACTIONAL: &str = r#"{"s": 0.5, "d": 2, "alpha1": 1.0, "alpha2": 1.0, "profile": {"kind": "constant"}}"#;
const ANISOTROPIC: &str = r#"{"s": 0.5, "d": 2, "alpha1": 1.0, "alpha2": 4.0,
    "profile": {"kind": "harmonic", "base": 2.5, "terms": [{"direction": [1.0, 0.0], "power": 2, "coeff": 1.5}]}}"#;

fn nonlocal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonlocal"))
        .args(args)
        .current_dir(dir)
        .env_remove("NONLOCAL_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn error_object(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn symbol_table_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.json", &format!(r#"{{"kernel": {FRACTIONAL}, "grid": {{"n": [8, 8]}}}}"#));
    let out = nonlocal(&["symbol", "c.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, body) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(body.len(), 64);
    let dev = header.iter().position(|h| h == "closed_form_deviation").unwrap();
    let worst = body.iter().map(|r| r[dev].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst}");
    // the zero frequency comes first and is all zeros
    assert!(body[0][1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    // 17 significant digits
    assert_eq!(body[1][3].split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
}

#[test]
fn symbol_without_closed_form_leaves_column_empty() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.json", &format!(r#"{{"kernel": {ANISOTROPIC}, "grid": {{"n": [4, 4]}}}}"#));
    let out = nonlocal(&["symbol", "c.json", "-o", "t.csv"], dir.path());
    assert!(out.status.success());
    let (_, body) = rows(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap());
    assert!(body.iter().all(|r| r.last().unwrap().is_empty()));
    let ratio: Vec<f64> = body[1..].iter().map(|r| r[r.len() - 2].parse().unwrap()).collect();
    assert!(ratio.iter().all(|&v| v > 0.0));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.json", "{ not json");
    let out = nonlocal(&["symbol", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_object(&out)["error"]["kind"], "config");

    write(dir.path(), "extra.json", &format!(r#"{{"kernel": {FRACTIONAL}, "grid": {{"n": [4, 4]}}, "typo": 1}}"#));
    assert_eq!(nonlocal(&["symbol", "extra.json"], dir.path()).status.code(), Some(2));

    let out = nonlocal(&["symbol", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "s.json", &format!(r#"{{"kernel": {ANISOTROPIC}, "grid": {{"n": [8, 8]}}}}"#));
    let a = nonlocal(&["symbol", "s.json"], dir.path()).stdout;
    let b = nonlocal(&["--threads", "1", "symbol", "s.json"], dir.path()).stdout;
    assert_eq!(a, b);

    write(
        dir.path(),
        "e.json",
        &format!(r#"{{"kernel": {ANISOTROPIC}, "lambda": 0.5, "grid": {{"n": [8, 8]}}, "seed": 7}}"#),
    );
    for tag in ["a", "b"] {
        let out = nonlocal(
            &["solve-elliptic", "e.json", "-o", &format!("{tag}.nlsf"), "--manifest", &format!("{tag}.json"), "--omit-timings"],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.nlsf"), read("b.nlsf"));
    let strip = |n: &str| String::from_utf8(read(n)).unwrap().replace("a.nlsf", "").replace("b.nlsf", "");
    assert_eq!(strip("a.json"), strip("b.json"));
}

#[test]
fn elliptic_round_trip_from_file() {
    let dir = TempDir::new().unwrap();
    let grid = GridSpec::cube(2, 16, 1.0).unwrap();
    let f = ensemble_member(&grid, 2, &EnsembleConfig::default(), 3).unwrap();
    write_field(&f, dir.path().join("f.nlsf")).unwrap();
    write(dir.path(), "e.json", &format!(r#"{{"kernel": {ANISOTROPIC}, "lambda": 1.0}}"#));
    let out = nonlocal(&["solve-elliptic", "e.json", "-i", "f.nlsf", "-o", "u.nlsf"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("u.nlsf.manifest.json")).unwrap()).unwrap();
    assert!(manifest["residuals"]["relative"].as_f64().unwrap() <= 1e-10);
    assert!(manifest["iterations"].is_null());
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["timings_seconds"]["total"].as_f64().unwrap() >= 0.0);

    let k = KernelSpec::new(serde_json::from_str(ANISOTROPIC).unwrap()).unwrap();
    let table = tabulate_symbol(&grid, &k, &SymbolQuadrature::default()).unwrap();
    let u = read_field(dir.path().join("u.nlsf")).unwrap();
    assert!(elliptic_residual(&u, &f, &table, 1.0).unwrap() <= 1e-10);

    write(
        dir.path(),
        "h.json",
        &format!(r#"{{"kernel": {ANISOTROPIC}, "lambda": 1.0, "method": "homotopy"}}"#),
    );
    let out = nonlocal(&["solve-elliptic", "h.json", "-i", "f.nlsf", "-o", "h.nlsf"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("h.nlsf.manifest.json")).unwrap()).unwrap();
    assert!(manifest["iterations"].as_u64().unwrap() > 0);
    let h = read_field(dir.path().join("h.nlsf")).unwrap();
    // converged to tol = 1e-9 in the relative residual
    assert!(elliptic_residual(&h, &f, &table, 1.0).unwrap() <= 1e-9);
    assert!(nonlocal_core::operator::rel_l2(&h, &u) <= 1e-8);
}

#[test]
fn elliptic_error_codes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.json", &format!(r#"{{"kernel": {FRACTIONAL}, "lambda": 1.0}}"#));
    let out = nonlocal(&["solve-elliptic", "e.json", "-i", "nope.nlsf", "-o", "u.nlsf"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_object(&out)["error"]["kind"], "io");

    write(dir.path(), "junk.nlsf", "NOPE and some bytes");
    let out = nonlocal(&["solve-elliptic", "e.json", "-i", "junk.nlsf", "-o", "u.nlsf"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    write(dir.path(), "z.json", &format!(r#"{{"kernel": {FRACTIONAL}, "lambda": 0.0, "grid": {{"n": [8, 8]}}}}"#));
    let out = nonlocal(&["solve-elliptic", "z.json", "-o", "u.nlsf"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let msg = error_object(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("lambda must be positive"), "{msg}");

    // no input and no grid to synthesize on
    let out = nonlocal(&["solve-elliptic", "e.json", "-o", "u.nlsf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parabolic_constant_forcing_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "p.json",
        &format!(r#"{{"kernel": {ANISOTROPIC}, "lambda": 1.0, "horizon": 1.0, "steps": 8, "grid": {{"n": [8, 8]}}}}"#),
    );
    let out = nonlocal(&["solve-parabolic", "p.json", "-o", "u.nlsf", "--trajectory", "t.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("u.nlsf.manifest.json")).unwrap()).unwrap();
    assert!(manifest["residuals"]["closed_form_relative"].as_f64().unwrap() <= 1e-8);
    let (header, body) = rows(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap());
    assert_eq!(header, ["t", "l2_norm"]);
    assert_eq!(body.len(), 9);
    assert_eq!(body[0][1].parse::<f64>().unwrap(), 0.0);

    write(
        dir.path(),
        "o.json",
        &format!(
            r#"{{"kernel": {ANISOTROPIC}, "lambda": 1.0, "horizon": 1.0, "steps": 8, "forcing": "oscillating", "grid": {{"n": [8, 8]}}}}"#
        ),
    );
    let out = nonlocal(&["solve-parabolic", "o.json", "-o", "v.nlsf"], dir.path());
    assert!(out.status.success());
    let out = nonlocal(&["solve-parabolic", "o.json", "-i", "u.nlsf", "-o", "v.nlsf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "v.json", r#"{"suites": ["heat-kernel-bounds", "cancellation-gate"], "n": 16}"#);
    let out = nonlocal(&["verify", "v.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    for c in report["checks"].as_array().unwrap() {
        assert!(!c["anchor"].as_str().unwrap().is_empty());
        assert!(c["measured"].is_number() && c["bound"].is_number());
    }

    write(dir.path(), "empty.json", r#"{"suites": []}"#);
    assert_eq!(nonlocal(&["verify", "empty.json"], dir.path()).status.code(), Some(2));
    write(dir.path(), "unknown.json", r#"{"suites": ["no-such-suite"]}"#);
    assert_eq!(nonlocal(&["verify", "unknown.json"], dir.path()).status.code(), Some(2));
    write(
        dir.path(),
        "zero.json",
        r#"{"suites": ["coercivity"], "kernel": {"s": 0.5, "d": 2, "alpha1": 0.0, "alpha2": 1.0, "profile": {"kind": "constant"}}}"#,
    );
    let out = nonlocal(&["verify", "zero.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_object(&out)["error"]["kind"], "config");

    // the heat-kernel bound cannot hold at zero frequency once T > 3
    write(dir.path(), "long.json", r#"{"suites": ["heat-kernel-bounds"], "horizons": [10.0]}"#);
    let out = nonlocal(&["verify", "long.json", "-o", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn bench_emits_csv() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b.json", r#"{"sizes": [8, 16], "steps": 4}"#);
    let out = nonlocal(&["bench", "b.json"], dir.path());
    assert!(out.status.success());
    let (header, body) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header[0], "n");
    assert_eq!(body.len(), 2);
    assert_eq!(body[1][1], "256");
}

#[test]
fn thread_override_is_validated() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b.json", r#"{"sizes": [8], "steps": 2}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_nonlocal"))
        .args(["bench", "b.json"])
        .current_dir(dir.path())
        .env("NONLOCAL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_nonlocal"))
        .args(["--threads", "4", "bench", "b.json"])
        .current_dir(dir.path())
        .env("NONLOCAL_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let (_, body) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(body[0][2], "2");
}
