use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::{build_table, TableInputs};
use crate::diagnostics::{energy_moment, Recorder, RecorderConfig};
use crate::dynamics::step_with;
use crate::error::{Error, Result};
use crate::initial_data::{sample, with_total_mass, DensityProfile};
use crate::io::config::RunConfig;
use crate::io::report::write_plots;
use crate::io::series::write_timeseries;
use crate::io::snapshot::write_snapshot;
use crate::model::{
    validate_theorem_hypotheses, ChargeState, ConstantsTable, DiagnosticRecord, HypothesisReport, SimState,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub max_level: u32,
    /// Steps in which at least one particle was refined.
    pub refined_steps: usize,
    /// Particle-steps that hit the refinement cap.
    pub saturated: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config_hash: String,
    pub profile: DensityProfile,
    pub table: ConstantsTable,
    pub hypotheses: HypothesisReport,
    pub records: Vec<DiagnosticRecord>,
    /// (step, state) at t = 0, every `snapshot_every` steps, and the end.
    pub snapshots: Vec<(usize, SimState)>,
    pub stats: RunStats,
}

impl RunOutput {
    pub fn final_state(&self) -> &SimState {
        &self.snapshots.last().expect("a run keeps at least its initial snapshot").1
    }
}

/// The profile after the optional mass rescaling.
pub fn run_profile(cfg: &RunConfig) -> Result<DensityProfile> {
    match cfg.total_mass {
        Some(m) => with_total_mass(&cfg.profile, m),
        None => Ok(cfg.profile.clone()),
    }
}

/// The sampled initial state of a config.
pub fn initial_state(cfg: &RunConfig) -> Result<(DensityProfile, SimState)> {
    let profile = run_profile(cfg)?;
    let ens = sample(&profile, cfg.n_particles, cfg.seed)?;
    let charge = ChargeState::new(profile.xi0, cfg.eta0)?;
    Ok((profile, SimState::new(ens, charge, cfg.softening)?))
}

/// Constants table of a run: ‖f0‖₁ is the sampled mass and H_m is taken at
/// t = 0, raised to 1 where smaller (t0 needs H_m ≥ 1).
pub fn run_table(cfg: &RunConfig, state: &SimState) -> Result<ConstantsTable> {
    let h_m = energy_moment(state, cfg.m).max(1.0);
    build_table(&TableInputs {
        m: cfg.m,
        m0: cfg.effective_m0(),
        t_final: cfg.t_final,
        k0: cfg.k0,
        f0_l1: state.ensemble.total_mass(),
        lambda: cfg.lambda,
        h_m,
    })
}

pub fn recorder_config(cfg: &RunConfig) -> RecorderConfig {
    RecorderConfig {
        moment_orders: cfg.moment_orders.clone(),
        rho_exponents: cfg.rho_exponents.clone(),
        field_exponents: cfg.field_exponents.clone(),
        grid: cfg.grid.clone(),
    }
}

fn snapshot_copy(state: &SimState) -> SimState {
    let mut s = state.clone();
    s.cached_field = None;
    s
}

/// Samples, steps to T and records diagnostics. Nothing is written.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let (profile, mut state) = initial_state(cfg)?;
    let table = run_table(cfg, &state)?;
    let hypotheses = validate_theorem_hypotheses(&state.ensemble, &state.charge, &table);
    let n_steps = ((cfg.t_final / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut recorder = Recorder::new(recorder_config(cfg));
    let mut records = vec![recorder.record(&mut state)?];
    let mut snapshots = vec![(0, snapshot_copy(&state))];
    let mut stats = RunStats::default();
    for s in 1..=n_steps {
        let st = step_with(&mut state, cfg.dt, &cfg.step)?;
        stats.steps += 1;
        stats.max_level = stats.max_level.max(st.max_level);
        stats.refined_steps += (st.refined > 0) as usize;
        stats.saturated += st.saturated;
        let last = s == n_steps;
        if s % cfg.record_every == 0 || last {
            records.push(recorder.record(&mut state)?);
        }
        if last || (cfg.snapshot_every > 0 && s % cfg.snapshot_every == 0) {
            snapshots.push((s, snapshot_copy(&state)));
        }
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutput { config_hash: cfg.hash(), profile, table, hypotheses, records, snapshots, stats })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: RunConfig,
    pub profile: DensityProfile,
    pub table: ConstantsTable,
    pub hypotheses: HypothesisReport,
    pub stats: RunStats,
    pub records: usize,
    pub timeseries: String,
    pub snapshots: Vec<String>,
    pub plots: Vec<String>,
}

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "run.json";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the series, snapshots, plots, the resolved config and a manifest.
pub fn write_run(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<RunManifest> {
    create_dir(dir)?;
    let hash = &out.config_hash;
    write_timeseries(&dir.join(TIMESERIES_FILE), &out.records, hash)?;
    let mut snaps = Vec::new();
    for (step, state) in &out.snapshots {
        let p = write_snapshot(dir, &format!("snapshot_{step:07}"), state, *step, hash)?;
        snaps.push(p.file_name().unwrap_or_default().to_string_lossy().into_owned());
    }
    let plots = write_plots(dir, &out.records, hash)?;
    let cfg_path = dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)?).map_err(|e| Error::io(&cfg_path, e))?;
    let manifest = RunManifest {
        config_hash: hash.clone(),
        config: cfg.clone(),
        profile: out.profile.clone(),
        table: out.table.clone(),
        hypotheses: out.hypotheses.clone(),
        stats: out.stats,
        records: out.records.len(),
        timeseries: TIMESERIES_FILE.into(),
        snapshots: snaps,
        plots,
    };
    let m_path = dir.join(MANIFEST_FILE);
    std::fs::write(&m_path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&m_path, e))?;
    Ok(manifest)
}

/// `simulate`: run and write into the resolved output directory.
pub fn simulate_to_dir(cfg: &RunConfig) -> Result<(PathBuf, RunManifest)> {
    let out = simulate(cfg)?;
    let dir = cfg.output_dir();
    let manifest = write_run(cfg, &out, &dir)?;
    Ok((dir, manifest))
}
