use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::K0_MIN;
use crate::dynamics::StepConfig;
use crate::error::{Error, Result};
use crate::fields::GridSpec;
use crate::initial_data::DensityProfile;
use crate::model::{Softening, Vec3};

/// Overrides the output directory of every subcommand.
pub const OUTPUT_DIR_ENV: &str = "VPCHARGE_OUTPUT_DIR";

/// Largest m0 used for profiles whose moments are finite at every order.
pub const M0_CAP: f64 = 12.0;

fn default_n() -> usize {
    1000
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t() -> f64 {
    1.0
}
fn default_k0() -> f64 {
    100.0
}
fn default_lambda() -> f64 {
    1.0
}
fn default_orders() -> Vec<f64> {
    vec![2.0, 4.0, 6.0]
}
fn default_rho_exponents() -> Vec<f64> {
    vec![1.0, 5.0 / 3.0, 2.0]
}
fn default_field_exponents() -> Vec<f64> {
    vec![2.0]
}
fn default_m() -> f64 {
    6.0
}
fn default_one() -> usize {
    1
}

/// What `verify` runs on a stored run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Random probes of the backward external flow.
    pub flow_probes: usize,
    pub probe_step: f64,
    pub probe_seed: u64,
    /// Cutoff radius as a multiple of R(T); below 1 the flow bounds are not
    /// expected to hold.
    pub cutoff_scale: f64,
    /// b in the ρ interpolation check.
    pub rho_interp_b: f64,
    /// s in the Sobolev checks.
    pub sobolev_exponents: Vec<f64>,
    /// Limit on max_t ‖E(t)‖_q / ‖E(0)‖_q.
    pub field_growth_limit: f64,
    /// Also run the Duhamel split on the built-in manufactured field.
    pub manufactured_duhamel: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            flow_probes: 20,
            probe_step: 1e-4,
            probe_seed: 1,
            cutoff_scale: 1.0,
            rho_interp_b: 2.0,
            sobolev_exponents: vec![2.0, 4.0],
            field_growth_limit: 10.0,
            manufactured_duhamel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: DensityProfile,
    /// Rescales the profile to this mass before sampling.
    #[serde(default)]
    pub total_mass: Option<f64>,
    #[serde(default = "default_n")]
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default)]
    pub eta0: Vec3,
    #[serde(default)]
    pub softening: Softening,
    #[serde(default)]
    pub step: StepConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(rename = "K0", default = "default_k0")]
    pub k0: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Orders k of the recorded H_k and M_k.
    #[serde(default = "default_orders")]
    pub moment_orders: Vec<f64>,
    #[serde(default = "default_rho_exponents")]
    pub rho_exponents: Vec<f64>,
    /// Field norms recorded in addition to ‖E‖_{k+3}.
    #[serde(default = "default_field_exponents")]
    pub field_exponents: Vec<f64>,
    /// Moment order of the theorem; enters the constants table.
    #[serde(default = "default_m")]
    pub m: f64,
    /// Defaults to the profile's critical order, capped at 12.
    #[serde(default)]
    pub m0: Option<f64>,
    /// Steps between diagnostic records.
    #[serde(default = "default_one")]
    pub record_every: usize,
    /// Steps between snapshots; 0 keeps only the first and last.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Config with every optional field at its default.
    pub fn with_profile(profile: DensityProfile) -> Self {
        serde_json::from_value(serde_json::json!({ "profile": profile })).expect("a profile alone is a complete config")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, reason: String| Err(Error::Config { path: path.into(), reason });
        self.profile.validate().map_err(|e| Error::Config { path: "profile".into(), reason: e.to_string() })?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("{} must be positive", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("T", format!("{} must be positive", self.t_final));
        }
        if self.n_particles == 0 {
            return bad("n_particles", "need at least one particle".into());
        }
        if !(self.k0 >= K0_MIN) {
            return bad("K0", format!("{} is below the minimum {K0_MIN}", self.k0));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda", format!("{} must lie in (0, 1]", self.lambda));
        }
        if let Some(m) = self.total_mass {
            if !(m > 0.0 && m.is_finite()) {
                return bad("total_mass", format!("{m} must be positive"));
            }
        }
        if self.record_every == 0 {
            return bad("record_every", "must be at least 1".into());
        }
        if self.moment_orders.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return bad("moment_orders", "orders must be finite and nonnegative".into());
        }
        if self.rho_exponents.iter().chain(&self.field_exponents).any(|p| !(*p >= 1.0)) {
            return bad("rho_exponents", "norm exponents must be at least 1".into());
        }
        let m0 = self.effective_m0();
        if !(self.m > 3.0 && self.m < m0) {
            return bad("m", format!("{} must lie in (3, m0 = {m0})", self.m));
        }
        if self.softening.plasma < 0.0 || self.softening.charge < 0.0 {
            return bad("softening", "softening lengths must be nonnegative".into());
        }
        Ok(())
    }

    pub fn effective_m0(&self) -> f64 {
        self.m0.unwrap_or_else(|| self.profile.admissible_m0()).min(M0_CAP)
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form, with
    /// the output directory left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(digest)[..16].to_string()
    }

    /// The env override, else the config's directory, else `vpcharge-out`.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output_dir(self.output_dir.as_deref())
    }
}

pub fn resolve_output_dir(configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => configured.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("vpcharge-out")),
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config { path, reason: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}
