use std::path::Path;
use std::process::{Command, Output};

use vpcharge::io::{parse_config, read_timeseries, CheckEntry, VerifyReport, OUTPUT_DIR_ENV};

const BIN: &str = env!("CARGO_BIN_EXE_vpcharge");

fn example_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example.json")
}

fn run(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove(OUTPUT_DIR_ENV);
    if let Some(d) = out_dir {
        cmd.env(OUTPUT_DIR_ENV, d);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn constants_prints_a_table_with_c0() {
    let out = run(&["constants", "--m", "6", "--m0", "7", "--T", "10"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c0 = v["c0_m"].as_f64().expect("c0 populated");
    assert!((100.0..=1000.0).contains(&c0));
    assert_eq!(v["T"], 10.0);
    // R(T) = (24 K0 (1 + ‖f0‖₁))^{1/3} (1 + T) with the defaults K0 = 100, ‖f0‖₁ = 1
    let r = (24.0f64 * 100.0 * 2.0).cbrt() * 11.0;
    assert!((v["R_T"].as_f64().unwrap() - r).abs() < 1e-9 * r);
}

#[test]
fn constants_rejects_small_k0() {
    let out = run(&["constants", "--m", "6", "--m0", "7", "--T", "1", "--K0", "99"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K0"));
}

#[test]
fn bad_config_fails_with_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(example_path()).unwrap()).unwrap();
    v["dt"] = (-1.0).into();
    std::fs::write(&p, v.to_string()).unwrap();
    let out = run(&["simulate", p.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`dt`"));
}

#[test]
fn simulate_verify_report_on_the_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = run(&["simulate", example_path().to_str().unwrap()], Some(&out_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // the environment wins over the config's output_dir
    let cfg = parse_config(&example_path()).unwrap();
    let (records, hash) = read_timeseries(&out_dir.join("timeseries.csv")).unwrap();
    assert_eq!(hash, cfg.hash());
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    assert!(records.len() >= steps / cfg.record_every);
    assert!(out_dir.join("run.json").exists());

    let out = run(&["verify", out_dir.to_str().unwrap()], None);
    let report: VerifyReport =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.config_hash, hash);
    // conservation, two per moment order, polynomial, virial, field growth,
    // hypotheses, density interpolation, one per Sobolev exponent, field
    // bounds, flow bounds and the Duhamel entry
    let expected = 1 + 2 * cfg.moment_orders.len() + 8 + cfg.verify.sobolev_exponents.len();
    assert_eq!(report.entries.len(), expected);
    let code = if report.pass { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(code));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), report.entries.len() + 1);
    let names: Vec<&str> = report.entries.iter().map(|e: &CheckEntry| e.name.as_str()).collect();
    assert!(names.contains(&"flow_bounds") && names.contains(&"conservation"));

    let out = run(&["report", out_dir.to_str().unwrap()], None);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], hash.as_str());
    assert_eq!(summary["mass_drift"], 0.0);
}
