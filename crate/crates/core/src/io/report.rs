use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::linear_envelope;
use crate::io::run::TIMESERIES_FILE;
use crate::io::series::{header, read_timeseries};
use crate::io::svg::render_svg;
use crate::model::DiagnosticRecord;

/// Renders the standard plots into `dir` and returns their file names.
pub fn write_plots(dir: &Path, records: &[DiagnosticRecord], config_hash: &str) -> Result<Vec<String>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let cols = header(first);
    let with_prefix = |p: &str| cols.iter().filter(|c| c.starts_with(p)).cloned().collect::<Vec<_>>();
    let plots: Vec<(&str, &str, Vec<String>)> = vec![
        ("energy.svg", "Total energy", vec!["energy".into()]),
        ("energy_moments.svg", "Energy moments H_k (running sup)", with_prefix("H_")),
        ("velocity_moments.svg", "Velocity moments M_k", with_prefix("M_")),
        ("charge.svg", "Charge speed and distance from origin", vec!["eta_norm".into(), "xi_norm".into()]),
        ("virial.svg", "Running virial integrals", vec!["virial_E_integral".into(), "virial_inverse_sq".into()]),
        ("field_norms.svg", "Field norms", with_prefix("E_L")),
    ];
    let mut names = Vec::new();
    for (file, title, columns) in plots {
        if columns.is_empty() {
            continue;
        }
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let svg = render_svg(records, &refs, title, config_hash)?;
        let p = dir.join(file);
        std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        names.push(file.to_string());
    }
    Ok(names)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub records: usize,
    pub t_end: f64,
    pub mass_drift: f64,
    pub energy_rel_drift: f64,
    pub max_eta: f64,
    pub min_charge_distance: f64,
    /// (k, H_k at the end).
    pub final_energy_moments: Vec<(f64, f64)>,
    pub virial_slope_e: f64,
    pub virial_slope_inverse_sq: f64,
    pub plots: Vec<String>,
}

pub fn summarize(records: &[DiagnosticRecord], config_hash: &str, plots: Vec<String>) -> Result<RunSummary> {
    let first = records.first().ok_or_else(|| Error::Series("empty time series".into()))?;
    let last = &records[records.len() - 1];
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ve: Vec<f64> = records.iter().map(|r| r.virial_e_integral).collect();
    let vi: Vec<f64> = records.iter().map(|r| r.virial_inverse_sq).collect();
    Ok(RunSummary {
        config_hash: config_hash.to_string(),
        records: records.len(),
        t_end: last.t,
        mass_drift: records.iter().map(|r| (r.mass - first.mass).abs()).fold(0.0, f64::max),
        energy_rel_drift: records.iter().map(|r| ((r.energy - first.energy) / first.energy).abs()).fold(0.0, f64::max),
        max_eta: records.iter().map(|r| r.eta_norm).fold(0.0, f64::max),
        min_charge_distance: records.iter().map(|r| r.min_charge_distance).fold(f64::INFINITY, f64::min),
        final_energy_moments: last.hk_sup.0.clone(),
        virial_slope_e: linear_envelope(&ts, &ve).a,
        virial_slope_inverse_sq: linear_envelope(&ts, &vi).a,
        plots,
    })
}

pub const SUMMARY_FILE: &str = "summary.json";

/// `report`: re-renders the plots of a stored run and writes summary.json.
pub fn report_dir(dir: &Path) -> Result<RunSummary> {
    let (records, hash) = read_timeseries(&dir.join(TIMESERIES_FILE))?;
    let plots = write_plots(dir, &records, &hash)?;
    let summary = summarize(&records, &hash, plots)?;
    let p = dir.join(SUMMARY_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}
