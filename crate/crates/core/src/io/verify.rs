use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_bound_report, probe_bundle, FlowBoundReport, RunFieldHistory};
use crate::error::{Error, Result};
use crate::estimates::{
    check_conservation, check_energy_velocity, check_field_growth, check_moment_ode, check_polynomial_bound,
    check_rho_interpolation, check_sobolev, check_virial, duhamel_default, duhamel_for_run, ManufacturedConfig,
};
use crate::fields::{ext_bounds_check, grid_field, CutoffSpec, ExtSource};
use crate::io::config::{parse_config, RunConfig};
use crate::io::run::{run_table, RunOutput, CONFIG_FILE, TIMESERIES_FILE};
use crate::io::series::read_timeseries;
use crate::io::snapshot::{list_snapshots, load_snapshot};
use crate::model::{validate_theorem_hypotheses, ConstantsTable, DiagnosticRecord, SimState, Vec3};
use crate::par::map_indexed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub skipped: bool,
    pub worst_ratio: Option<f64>,
    pub reason: Option<String>,
    pub details: serde_json::Value,
}

impl CheckEntry {
    fn done<T: Serialize>(name: impl Into<String>, pass: bool, worst: f64, details: &T) -> Self {
        CheckEntry {
            name: name.into(),
            pass,
            skipped: false,
            worst_ratio: worst.is_finite().then_some(worst),
            reason: None,
            details: serde_json::to_value(details).unwrap_or(serde_json::Value::Null),
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        CheckEntry {
            name: name.into(),
            pass: true,
            skipped: true,
            worst_ratio: None,
            reason: Some(reason.into()),
            details: serde_json::Value::Null,
        }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        CheckEntry {
            name: name.into(),
            pass: false,
            skipped: false,
            worst_ratio: None,
            reason: Some(err.to_string()),
            details: serde_json::Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub entries: Vec<CheckEntry>,
    pub failed: Vec<String>,
    pub pass: bool,
}

/// Probe points: x uniform in the ball of `radius` about `center`, v
/// normal with standard deviation `v_std` per axis.
pub fn random_probes(count: usize, center: Vec3, radius: f64, v_std: f64, seed: u64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| {
        Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
    };
    (0..count)
        .map(|_| {
            let d = loop {
                let g = normal(&mut rng);
                let n = g.norm();
                if n > 0.0 {
                    break g / n;
                }
            };
            let u: f64 = rng.random();
            let x = center + d * (radius * u.cbrt());
            let v = normal(&mut rng) * v_std;
            (x, v)
        })
        .collect()
}

/// External-field history of a run from its snapshots.
pub fn field_history(snapshots: &[&SimState], cutoff: CutoffSpec) -> Result<RunFieldHistory> {
    let times = snapshots.iter().map(|s| s.t).collect();
    let sources = snapshots.iter().map(|s| ExtSource::new(&s.ensemble, s.charge.xi, cutoff)).collect();
    RunFieldHistory::new(times, sources)
}

/// Probe bundles on s ∈ {0, T/8, …, T} against the history, then the bound
/// report with `table.r_t` as the cutoff radius.
pub fn flow_bounds(
    history: &RunFieldHistory,
    table: &ConstantsTable,
    f0_l1: f64,
    probes: &[(Vec3, Vec3)],
    step: f64,
) -> Result<FlowBoundReport> {
    let t = table.t_final;
    let s_grid: Vec<f64> = (0..=8).map(|k| if k == 8 { t } else { t * k as f64 / 8.0 }).collect();
    let bundles = map_indexed(probes.len(), |i| probe_bundle(t, &s_grid, probes[i].0, probes[i].1, history, step));
    let bundles: Vec<_> = bundles.into_iter().collect::<Result<_>>()?;
    Ok(flow_bound_report(&bundles, table, f0_l1))
}

fn velocity_std(state: &SimState) -> f64 {
    let e = &state.ensemble;
    if e.is_empty() {
        return 1.0;
    }
    let n = e.len() as f64;
    let mean = e.velocities.iter().fold(Vec3::zeros(), |a, v| a + v) / n;
    let var = e.velocities.iter().map(|v| (v - mean).norm_squared()).sum::<f64>() / (3.0 * n);
    var.sqrt().max(1e-12)
}

/// The check suite on a run's records and snapshots (time-ordered).
pub fn verify_parts(
    cfg: &RunConfig,
    hash: &str,
    records: &[DiagnosticRecord],
    snapshots: &[&SimState],
) -> Result<VerifyReport> {
    let first = *snapshots.first().ok_or_else(|| Error::Missing("run has no snapshots".into()))?;
    let last = *snapshots.last().expect("nonempty");
    let opts = &cfg.verify;
    let mut entries = Vec::new();
    let settle = |name: &str, r: Result<CheckEntry>| r.unwrap_or_else(|e| CheckEntry::failed(name, &e));

    entries.push(settle(
        "conservation",
        check_conservation(records).map(|r| {
            let worst = r.energy_rel_drift / r.tolerance;
            CheckEntry::done("conservation", r.pass, worst, &r)
        }),
    ));
    for &k in &cfg.moment_orders {
        let name = format!("energy_velocity_k{k}");
        entries.push(settle(
            &name,
            check_energy_velocity(records, k).map(|r| CheckEntry::done(&name, r.pass, r.max_ratio, &r)),
        ));
        let name = format!("moment_ode_k{k}");
        entries.push(settle(
            &name,
            check_moment_ode(records, k).map(|r| CheckEntry::done(&name, r.pass, r.integrated.max_ratio, &r)),
        ));
    }
    let table = run_table(cfg, first)?;
    let t_end = records.last().map(|r| r.t).unwrap_or(0.0);
    let poly = "polynomial_bound";
    if t_end < 2.0 {
        entries.push(CheckEntry::skipped(poly, format!("run length {t_end} is below 2")));
    } else if !cfg.moment_orders.iter().any(|k| (k - cfg.m).abs() < 1e-12) {
        entries.push(CheckEntry::skipped(poly, format!("m = {} is not among the recorded orders", cfg.m)));
    } else if table.c0_m.is_none() {
        entries.push(CheckEntry::skipped(poly, format!("c0 is defined only for 16/3 < m < 7, m = {}", cfg.m)));
    } else {
        entries.push(settle(
            poly,
            check_polynomial_bound(records, cfg.m, &table).map(|r| CheckEntry::done(poly, r.pass, r.slope / r.c0, &r)),
        ));
    }
    if t_end < 2.0 {
        // a(1 + t) only bounds integrals that grow like t once t is past 1
        entries.push(CheckEntry::skipped("virial", format!("run length {t_end} is below 2")));
    } else {
        entries.push(settle(
            "virial",
            check_virial(records).map(|r| {
                let w = r.field_at_charge.max_ratio.max(r.inverse_square.max_ratio) / r.tolerance;
                CheckEntry::done("virial", r.pass, w, &r)
            }),
        ));
    }
    entries.push(settle(
        "field_growth",
        check_field_growth(records, opts.field_growth_limit).map(|r| {
            let w = r.growth.iter().map(|g| g.1).fold(0.0, f64::max) / r.limit;
            CheckEntry::done("field_growth", r.pass, w, &r)
        }),
    ));

    let hyp = validate_theorem_hypotheses(&first.ensemble, &first.charge, &table);
    entries.push(CheckEntry::done("hypotheses", hyp.pass(), f64::NAN, &hyp));
    entries.push(settle(
        "rho_interpolation",
        check_rho_interpolation(&first.ensemble, &cfg.grid, opts.rho_interp_b, None)
            .map(|r| CheckEntry::done("rho_interpolation", r.pass, r.ratio, &r)),
    ));
    for &s in &opts.sobolev_exponents {
        let name = format!("sobolev_s{s}");
        let r = grid_field(&last.ensemble, &cfg.grid).and_then(|g| check_sobolev(&g, s));
        entries.push(settle(
            &name,
            r.map(|r| CheckEntry::done(&name, r.pass, (r.ratio_change / r.expected_change - 1.0).abs(), &r)),
        ));
    }

    let cutoff = CutoffSpec::new(table.r_t * opts.cutoff_scale)?;
    let mut scaled = table.clone();
    scaled.r_t = cutoff.r;
    let f0_l1 = first.ensemble.total_mass();
    let mut ext_worst: f64 = 0.0;
    let mut ext_pass = true;
    let mut ext_reports = Vec::new();
    for (i, s) in snapshots.iter().enumerate() {
        let src = ExtSource::new(&s.ensemble, s.charge.xi, cutoff);
        let rep = ext_bounds_check(&src, f0_l1, 200, opts.probe_seed + i as u64);
        ext_worst = ext_worst.max(rep.worst_ratio());
        ext_pass &= rep.pass;
        ext_reports.push(rep);
    }
    entries.push(CheckEntry::done("ext_field_bounds", ext_pass, ext_worst, &ext_reports));

    let history = field_history(snapshots, cutoff)?;
    if opts.flow_probes > 0 {
        let probes =
            random_probes(opts.flow_probes, last.charge.xi, 3.0 * cutoff.r, velocity_std(first), opts.probe_seed);
        entries.push(settle(
            "flow_bounds",
            flow_bounds(&history, &scaled, f0_l1, &probes, opts.probe_step)
                .map(|r| CheckEntry::done("flow_bounds", r.pass, r.worst(), &r)),
        ));
    } else {
        entries.push(CheckEntry::skipped("flow_bounds", "flow_probes = 0"));
    }
    let d = duhamel_for_run(Some(&history))?;
    entries.push(CheckEntry::skipped("duhamel_split_run", d.reason.clone().unwrap_or_default()));
    if opts.manufactured_duhamel {
        entries.push(settle(
            "duhamel_split_manufactured",
            duhamel_default(&ManufacturedConfig::default())
                .map(|r| CheckEntry::done("duhamel_split_manufactured", r.pass, 1.0 / r.min_order, &r)),
        ));
    }

    let failed: Vec<String> = entries.iter().filter(|e| !e.pass).map(|e| e.name.clone()).collect();
    Ok(VerifyReport { config_hash: hash.to_string(), pass: failed.is_empty(), failed, entries })
}

/// Suite on an in-memory run.
pub fn verify_output(cfg: &RunConfig, out: &RunOutput) -> Result<VerifyReport> {
    let snaps: Vec<&SimState> = out.snapshots.iter().map(|(_, s)| s).collect();
    verify_parts(cfg, &out.config_hash, &out.records, &snaps)
}

pub const REPORT_FILE: &str = "report.json";

/// `verify`: loads a stored run, runs the suite and writes report.json.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let cfg = parse_config(&dir.join(CONFIG_FILE))?;
    let (records, hash) = read_timeseries(&dir.join(TIMESERIES_FILE))?;
    if hash != cfg.hash() {
        return Err(Error::Series(format!("series hash {hash} does not match config hash {}", cfg.hash())));
    }
    let mut states = Vec::new();
    for (_, p) in list_snapshots(dir)? {
        let (s, meta) = load_snapshot(&p)?;
        if meta.config_hash != hash {
            return Err(Error::Series(format!("{} belongs to another run", p.display())));
        }
        states.push(s);
    }
    let refs: Vec<&SimState> = states.iter().collect();
    let report = verify_parts(&cfg, &hash, &records, &refs)?;
    let p = dir.join(REPORT_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&p, e))?;
    Ok(report)
}
