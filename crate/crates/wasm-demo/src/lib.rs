//! Browser bindings for three operations: the constants table and c0 curve,
//! a small particle run stepped from JS, and flow-probe bounds on that run.
//!
//! Nothing here reads the clock; `vpcharge::io::simulate` does, and
//! `Instant` panics on wasm32, so the run is driven step by step instead.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vpcharge::constants::{build_table, c0_of, TableInputs};
use vpcharge::diagnostics::Recorder;
use vpcharge::dynamics::step;
use vpcharge::fields::CutoffSpec;
use vpcharge::initial_data::{DensityProfile, ProfileKind};
use vpcharge::io::{field_history, flow_bounds, initial_state, random_probes, recorder_config, run_table, RunConfig};
use vpcharge::model::DiagnosticRecord;
use vpcharge::{SimState, Vec3};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Constants table as JSON; H_m is taken as 1.
#[wasm_bindgen]
pub fn constants_table(m: f64, m0: f64, t_final: f64, k0: f64, f0_l1: f64) -> Result<String, JsError> {
    let table = build_table(&TableInputs { m, m0, t_final, k0, f0_l1, lambda: 1.0, h_m: 1.0 }).map_err(js_err)?;
    serde_json::to_string(&table).map_err(js_err)
}

/// c0 at `n` evenly spaced m in [lo, hi]; NaN where it is undefined.
#[wasm_bindgen]
pub fn c0_curve(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| c0_of(lo + (hi - lo) * i as f64 / (n - 1) as f64).unwrap_or(f64::NAN)).collect()
}

#[derive(Serialize)]
struct Status<'a> {
    t: f64,
    steps: usize,
    energy_rel_drift: f64,
    eta_norm: f64,
    min_charge_distance: f64,
    record: &'a DiagnosticRecord,
}

/// A small run: a Maxwellian bump with a hole about a charge at rest.
#[wasm_bindgen]
pub struct Demo {
    cfg: RunConfig,
    state: SimState,
    recorder: Recorder,
    first: DiagnosticRecord,
    last: DiagnosticRecord,
    history: Vec<SimState>,
    steps: usize,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u64, temperature: f64, hole: f64, mass: f64) -> Result<Demo, JsError> {
        let profile = DensityProfile {
            kind: ProfileKind::MaxwellianBump,
            spatial_center: Vec3::new(0.5, 0.0, 0.0),
            spatial_radius: 1.0,
            velocity_temperature: temperature,
            vicinity_exponent: 0.0,
            amplitude: 0.1,
            epsilon_hole: hole,
            xi0: Vec3::zeros(),
        };
        let mut cfg = RunConfig::with_profile(profile);
        cfg.n_particles = n;
        cfg.seed = seed;
        cfg.total_mass = Some(mass);
        cfg.moment_orders = vec![2.0, 4.0];
        cfg.validate().map_err(js_err)?;
        let (_, mut state) = initial_state(&cfg).map_err(js_err)?;
        let mut recorder = Recorder::new(recorder_config(&cfg));
        let first = recorder.record(&mut state).map_err(js_err)?;
        let snap = without_cache(&state);
        Ok(Demo { cfg, state, recorder, last: first.clone(), first, history: vec![snap], steps: 0 })
    }

    /// Takes `count` steps of size `dt`, keeps a snapshot for the probes,
    /// and returns a status JSON.
    pub fn advance(&mut self, count: usize, dt: f64) -> Result<String, JsError> {
        for _ in 0..count {
            step(&mut self.state, dt).map_err(js_err)?;
            self.steps += 1;
        }
        self.last = self.recorder.record(&mut self.state).map_err(js_err)?;
        self.history.push(without_cache(&self.state));
        self.status()
    }

    pub fn status(&self) -> Result<String, JsError> {
        let e0 = self.first.energy;
        let s = Status {
            t: self.state.t,
            steps: self.steps,
            energy_rel_drift: ((self.last.energy - e0) / e0).abs(),
            eta_norm: self.state.charge.eta.norm(),
            min_charge_distance: self.last.min_charge_distance,
            record: &self.last,
        };
        serde_json::to_string(&s).map_err(js_err)
    }

    /// Flattened (x, y) of every particle.
    pub fn positions_xy(&self) -> Vec<f64> {
        self.state.ensemble.positions.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// (x, y) of the charge.
    pub fn charge_xy(&self) -> Vec<f64> {
        vec![self.state.charge.xi.x, self.state.charge.xi.y]
    }

    /// Backward-flow bounds for `probes` random points near the charge,
    /// with the cutoff at `scale` · R(t). Below 1 the bounds may fail.
    pub fn probe_bounds(&self, probes: usize, scale: f64, seed: u64) -> Result<String, JsError> {
        if self.state.t <= 0.0 {
            return Err(JsError::new("advance the run before probing"));
        }
        let mut cfg = self.cfg.clone();
        cfg.t_final = self.state.t;
        let first = &self.history[0];
        let mut table = run_table(&cfg, first).map_err(js_err)?;
        table.r_t *= scale;
        let cutoff = CutoffSpec::new(table.r_t).map_err(js_err)?;
        let refs: Vec<&SimState> = self.history.iter().collect();
        let history = field_history(&refs, cutoff).map_err(js_err)?;
        let v_std = self.cfg.profile.velocity_temperature.sqrt();
        let pts = random_probes(probes, self.state.charge.xi, 3.0 * table.r_t, v_std, seed);
        let report = flow_bounds(&history, &table, first.ensemble.total_mass(), &pts, 1e-4).map_err(js_err)?;
        serde_json::to_string(&report).map_err(js_err)
    }
}

fn without_cache(s: &SimState) -> SimState {
    let mut c = s.clone();
    c.cached_field = None;
    c
}
