use std::path::Path;

use vpcharge::io::{
    header, load_snapshot, parse_config_str, read_timeseries, render_svg, simulate, write_run, write_snapshot,
    write_timeseries, RunConfig, SNAPSHOT_HEADER, TIMESERIES_FILE,
};
use vpcharge::Error;

const EXAMPLE: &str = include_str!("../configs/example.json");

fn small(t: f64) -> RunConfig {
    let mut cfg = parse_config_str(EXAMPLE).unwrap();
    cfg.n_particles = 300;
    cfg.t_final = t;
    cfg.record_every = 5;
    cfg.snapshot_every = 20;
    cfg
}

fn minimal_profile() -> serde_json::Value {
    serde_json::from_str::<serde_json::Value>(EXAMPLE).unwrap()["profile"].clone()
}

#[test]
fn header_matches_golden_file() {
    let cfg = RunConfig::with_profile(parse_config_str(EXAMPLE).unwrap().profile);
    let mut cfg = cfg;
    cfg.n_particles = 50;
    cfg.t_final = 2e-3;
    cfg.field_exponents = vec![2.0];
    let out = simulate(&cfg).unwrap();
    let golden = include_str!("golden/timeseries_header.csv").trim_end();
    assert_eq!(header(&out.records[0]).join(","), golden);
}

#[test]
fn every_row_has_the_header_width_and_reads_back_exactly() {
    let cfg = small(0.05);
    let out = simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join(TIMESERIES_FILE);
    write_timeseries(&p, &out.records, &out.config_hash).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# vpcharge timeseries config_hash={}", out.config_hash));
    let width = lines.next().unwrap().split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), out.records.len());
    assert!(rows.iter().all(|r| r.split(',').count() == width));
    // 50 steps recorded every 5, plus t = 0
    assert_eq!(rows.len(), 11);
    let (back, hash) = read_timeseries(&p).unwrap();
    assert_eq!(hash, out.config_hash);
    assert_eq!(back, out.records);
}

#[test]
fn snapshot_round_trip_is_bitwise() {
    let cfg = small(0.02);
    let out = simulate(&cfg).unwrap();
    let state = out.final_state();
    let dir = tempfile::tempdir().unwrap();
    let meta = write_snapshot(dir.path(), "snap", state, 20, &out.config_hash).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("snap.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some(SNAPSHOT_HEADER));
    let (back, m) = load_snapshot(&meta).unwrap();
    assert_eq!(m.config_hash, out.config_hash);
    assert_eq!(back.t.to_bits(), state.t.to_bits());
    assert_eq!(back.ensemble, state.ensemble);
    assert_eq!(back.charge, state.charge);
    assert_eq!(back.softening, state.softening);
    assert_eq!(back.reference, state.reference);
}

#[test]
fn tampered_snapshot_is_rejected() {
    let cfg = small(0.01);
    let out = simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let meta = write_snapshot(dir.path(), "snap", out.final_state(), 10, "0123456789abcdef").unwrap();
    let csv = dir.path().join("snap.csv");
    let text = std::fs::read_to_string(&csv).unwrap().replacen("0123456789abcdef", "ffffffffffffffff", 1);
    std::fs::write(&csv, text).unwrap();
    assert!(load_snapshot(&meta).is_err());
}

#[test]
fn svg_is_well_formed_and_carries_the_hash() {
    let out = simulate(&small(0.02)).unwrap();
    let svg = render_svg(&out.records, &["energy", "H_2"], "energy & <moments>", &out.config_hash).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("data-config-hash"), Some(out.config_hash.as_str()));
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    assert!(render_svg(&out.records, &["nope"], "x", "h").is_err());
}

#[test]
fn written_run_embeds_the_hash_everywhere() {
    let cfg = small(0.04);
    let out = simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&cfg, &out, dir.path()).unwrap();
    let mut checked = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if name == "config.json" {
            // the hash is computed from this file
            assert_eq!(vpcharge::io::parse_config(&p).unwrap().hash(), out.config_hash);
        } else {
            assert!(text.contains(&out.config_hash), "{name} lacks the config hash");
        }
        checked += 1;
    }
    // series, config, manifest, 3 snapshots × 2 files, 6 plots
    assert_eq!(checked, 15);
}

#[test]
fn config_defaults_are_filled() {
    let text = serde_json::json!({ "profile": minimal_profile() }).to_string();
    let cfg = parse_config_str(&text).unwrap();
    assert_eq!(cfg.dt, 1e-3);
    assert_eq!(cfg.k0, 100.0);
    assert_eq!(cfg.lambda, 1.0);
    assert_eq!(cfg.record_every, 1);
    assert!(cfg.output_dir.is_none());
}

fn config_error(v: serde_json::Value) -> (String, String) {
    let cfg = parse_config_str(&v.to_string()).and_then(|c| c.validate().map(|_| c));
    match cfg {
        Err(Error::Config { path, reason }) => (path, reason),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_name_the_field() {
    let (path, reason) = config_error(serde_json::json!({ "dt": 1e-3 }));
    assert!(path.contains("profile") || reason.contains("profile"), "{path}: {reason}");
    let (path, _) = config_error(serde_json::json!({ "profile": minimal_profile(), "dt": -1e-3 }));
    assert_eq!(path, "dt");
    let (path, reason) = config_error(serde_json::json!({ "profile": minimal_profile(), "K0": 99.0 }));
    assert_eq!(path, "K0");
    assert!(reason.contains("100"));
    let (path, _) =
        config_error(serde_json::json!({ "profile": minimal_profile(), "grid": { "type": "auto", "cells": "many" } }));
    assert!(path.starts_with("grid"), "{path}");
    let (_, reason) = config_error(serde_json::json!({ "profile": minimal_profile(), "dtt": 1.0 }));
    assert!(reason.contains("dtt"));
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = small(0.1);
    let mut b = a.clone();
    b.output_dir = Some(Path::new("/somewhere/else").to_path_buf());
    assert_eq!(a.hash(), b.hash());
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
}
