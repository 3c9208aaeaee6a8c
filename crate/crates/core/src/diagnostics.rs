//! Scalar functionals tracked along a run: energy, microscopic energy h,
//! energy and velocity moments, L^p norms of ρ and E, and the running
//! virial integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, GridSpec};
use crate::model::{DiagnosticRecord, OrderMap, SimState, Vec3};

/// H = ½Σw|v|² + ½|η|² + ½ΣΣ_{j≠i} w_i w_j/|x_i − x_j| + Σ w_i/|x_i − ξ|,
/// with the plasma softening in the pair term and the charge softening in
/// the last one, as in the forces.
pub fn total_energy(state: &SimState) -> Result<f64> {
    let ens = &state.ensemble;
    let kinetic: f64 = ens.velocities.iter().zip(&ens.weights).map(|(v, w)| 0.5 * w * v.norm_squared()).sum();
    let charge_kinetic = 0.5 * state.charge.eta.norm_squared();
    let (_, phi) = fields::pairwise_potential(ens, state.softening.plasma)?;
    let pair: f64 = 0.5 * phi.iter().zip(&ens.weights).map(|(p, w)| p * w).sum::<f64>();
    let eps2 = state.softening.charge.powi(2);
    let mut interaction = 0.0;
    for (i, (x, w)) in ens.positions.iter().zip(&ens.weights).enumerate() {
        let r2 = (x - state.charge.xi).norm_squared() + eps2;
        if r2 == 0.0 {
            return Err(Error::Singular { what: format!("particle {i} sits on the charge") });
        }
        interaction += w / r2.sqrt();
    }
    Ok(kinetic + charge_kinetic + pair + interaction)
}

fn h_of(state: &SimState, x: &Vec3, v: &Vec3) -> f64 {
    0.5 * (v - state.charge.eta).norm_squared() + 1.0 / (x - state.charge.xi).norm() + state.reference.offset()
}

/// h = |v − η|²/2 + 1/|x − ξ| + H(0) + 1/M0 + 1 for particle i.
pub fn micro_energy(state: &SimState, i: usize) -> Result<f64> {
    let x = state.ensemble.positions.get(i).ok_or_else(|| Error::param("i", format!("index {i} out of range")))?;
    if *x == state.charge.xi {
        return Err(Error::Singular { what: format!("particle {i} sits on the charge") });
    }
    Ok(h_of(state, x, &state.ensemble.velocities[i]))
}

/// H̃_k = Σ w h^{k/2}.
pub fn energy_moment(state: &SimState, k: f64) -> f64 {
    let e = &state.ensemble;
    e.positions.iter().zip(&e.velocities).zip(&e.weights).map(|((x, v), w)| w * h_of(state, x, v).powf(0.5 * k)).sum()
}

/// Σ w |v|^k.
pub fn velocity_moment(state: &SimState, k: f64) -> f64 {
    let e = &state.ensemble;
    e.velocities.iter().zip(&e.weights).map(|(v, w)| w * v.norm().powf(k)).sum()
}

/// ‖ρ‖_p of the cloud-in-cell density on `grid`.
pub fn lp_norm_rho(state: &SimState, grid: &GridSpec, p: f64) -> Result<f64> {
    let (origin, h, dims) = fields::resolve_grid(grid, &state.ensemble, &[])?;
    let rho = fields::deposit_cic(&state.ensemble, &origin, h, dims)?;
    let g = crate::model::GridField { origin, spacing: h, dims, rho, e: Vec::new() };
    Ok(fields::rho_lp_norm(&g, p))
}

/// Plasma field at the charge, with the charge softening.
pub fn field_at_charge(state: &SimState) -> Result<Vec3> {
    if let Some(c) = state.forces() {
        return Ok(c.e_at_xi);
    }
    let (_, on_charge) = fields::charge_forces(&state.ensemble, &state.charge.xi, state.softening.charge)?;
    Ok(on_charge)
}

/// Σ w / |x − ξ|².
pub fn inverse_square_sum(state: &SimState) -> f64 {
    let e = &state.ensemble;
    e.positions.iter().zip(&e.weights).map(|(x, w)| w / (x - state.charge.xi).norm_squared()).sum()
}

/// Advances ∫|E(s, ξ(s))| ds and ∫ Σ w/|x − ξ|² ds from `record` by one
/// trapezoid of width dt ending at `state`. Only t, e_at_xi,
/// inverse_sq_now and the two integrals of the result are updated.
pub fn virial_accumulate(state: &SimState, record: &DiagnosticRecord, dt: f64) -> Result<DiagnosticRecord> {
    let e_now = field_at_charge(state)?.norm();
    let inv_now = inverse_square_sum(state);
    let mut out = record.clone();
    out.t = state.t;
    out.virial_e_integral = record.virial_e_integral + 0.5 * dt * (record.e_at_xi + e_now);
    out.virial_inverse_sq = record.virial_inverse_sq + 0.5 * dt * (record.inverse_sq_now + inv_now);
    out.e_at_xi = e_now;
    out.inverse_sq_now = inv_now;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecorderConfig {
    /// Orders k of H̃_k, H_k and M_k.
    pub moment_orders: Vec<f64>,
    /// Exponents p of ‖ρ‖_p.
    pub rho_exponents: Vec<f64>,
    /// Exponents q of ‖E‖_q in addition to k + 3 for every moment order.
    pub field_exponents: Vec<f64>,
    pub grid: GridSpec,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        RecorderConfig {
            moment_orders: vec![2.0, 4.0, 6.0],
            rho_exponents: vec![1.0, 5.0 / 3.0, 2.0],
            field_exponents: vec![2.0],
            grid: GridSpec::default(),
        }
    }
}

impl RecorderConfig {
    pub fn all_field_exponents(&self) -> Vec<f64> {
        let mut q: Vec<f64> = self.field_exponents.clone();
        for k in &self.moment_orders {
            q.push(k + 3.0);
        }
        q.sort_by(f64::total_cmp);
        q.dedup();
        q
    }
}

/// Builds [`DiagnosticRecord`]s and keeps the running suprema.
#[derive(Clone, Debug)]
pub struct Recorder {
    pub config: RecorderConfig,
    last: Option<DiagnosticRecord>,
}

impl Recorder {
    pub fn new(config: RecorderConfig) -> Self {
        Recorder { config, last: None }
    }

    pub fn last(&self) -> Option<&DiagnosticRecord> {
        self.last.as_ref()
    }

    pub fn record(&mut self, state: &mut SimState) -> Result<DiagnosticRecord> {
        let ens = &state.ensemble;
        let xi = state.charge.xi;
        let grid = fields::grid_field_covering(ens, &self.config.grid, &[xi])?;
        let mut rec = match &self.last {
            None => {
                let mut seed = DiagnosticRecord { t: state.t, ..Default::default() };
                seed.e_at_xi = field_at_charge(state)?.norm();
                seed.inverse_sq_now = inverse_square_sum(state);
                seed
            }
            Some(prev) => virial_accumulate(state, prev, state.t - prev.t)?,
        };
        rec.mass = ens.total_mass();
        rec.energy = total_energy(state)?;
        for &k in &self.config.moment_orders {
            let h = energy_moment(state, k);
            let m = velocity_moment(state, k);
            rec.hk.insert(k, h);
            rec.mk.insert(k, m);
            let (hs, ms) = match &self.last {
                Some(p) => (p.hk_sup.get(k).unwrap_or(h).max(h), p.mk_sup.get(k).unwrap_or(m).max(m)),
                None => (h, m),
            };
            rec.hk_sup.insert(k, hs);
            rec.mk_sup.insert(k, ms);
        }
        rec.lp_rho = OrderMap::default();
        for &p in &self.config.rho_exponents {
            rec.lp_rho.insert(p, fields::rho_lp_norm(&grid, p));
        }
        rec.e_norms = OrderMap::default();
        for q in self.config.all_field_exponents() {
            rec.e_norms.insert(q, fields::field_lq_norm(&grid, q));
        }
        rec.e_at_xi_grid = fields::interpolate_e(&grid, &xi)?.norm();
        rec.eta_norm = state.charge.eta.norm();
        rec.xi_norm = xi.norm();
        rec.min_charge_distance = ens.min_distance_to(&xi);
        let mut min_h = f64::INFINITY;
        let mut max_ratio: f64 = 0.0;
        for (x, v) in ens.positions.iter().zip(&ens.velocities) {
            let h = h_of(state, x, v);
            min_h = min_h.min(h);
            max_ratio = max_ratio.max(v.norm() / (2.0 * h.sqrt()));
        }
        rec.min_h = min_h;
        rec.max_v_over_2sqrt_h = max_ratio;
        state.cached_field = Some(grid);
        self.last = Some(rec.clone());
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChargeState, ParticleEnsemble, Softening};

    fn state(pos: Vec<Vec3>, vel: Vec<Vec3>, w: Vec<f64>, charge: ChargeState) -> SimState {
        let ens = ParticleEnsemble::new(pos, vel, w).unwrap();
        SimState::new(ens, charge, Softening::default()).unwrap()
    }

    #[test]
    fn energy_examples() {
        let s = state(vec![], vec![], vec![], ChargeState { xi: Vec3::zeros(), eta: Vec3::x() });
        assert_eq!(total_energy(&s).unwrap(), 0.5);
        let s = state(vec![Vec3::x()], vec![Vec3::zeros()], vec![1.0], ChargeState::at_rest(Vec3::zeros()));
        assert_eq!(total_energy(&s).unwrap(), 1.0);
        let far = Vec3::new(1e9, 0.0, 0.0);
        let s = state(
            vec![far, far + Vec3::new(2.0, 0.0, 0.0)],
            vec![Vec3::zeros(); 2],
            vec![1.0, 1.0],
            ChargeState::at_rest(Vec3::zeros()),
        );
        assert!((total_energy(&s).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn micro_energy_substitution() {
        let eta = Vec3::new(0.3, 0.0, 0.0);
        let mut s = state(vec![Vec3::y()], vec![eta], vec![0.5], ChargeState { xi: Vec3::zeros(), eta });
        s.reference.h0 = 0.5;
        s.reference.mass = 0.5;
        assert!((micro_energy(&s, 0).unwrap() - 4.5).abs() < 1e-15);
    }

    #[test]
    fn zero_order_moments_are_mass() {
        let s = state(
            vec![Vec3::x(), Vec3::y()],
            vec![Vec3::zeros(), Vec3::z()],
            vec![0.2, 0.3],
            ChargeState::at_rest(Vec3::zeros()),
        );
        assert_eq!(energy_moment(&s, 0.0), 0.5);
        assert_eq!(velocity_moment(&s, 0.0), 0.5);
    }

    #[test]
    fn static_virial_increment() {
        let s = state(vec![Vec3::x() * 2.0], vec![Vec3::zeros()], vec![1.0], ChargeState::at_rest(Vec3::zeros()));
        let rec = DiagnosticRecord { e_at_xi: 0.25, inverse_sq_now: 0.25, ..Default::default() };
        let out = virial_accumulate(&s, &rec, 0.1).unwrap();
        assert!((out.virial_e_integral - 0.025).abs() < 1e-15);
        assert!((out.virial_inverse_sq - 0.025).abs() < 1e-15);
    }
}
