//! Shared domain types. Nothing here integrates or solves anything.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Weighted empirical measure standing in for f(t, x, v).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Vec3>, velocities: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        let ens = ParticleEnsemble { positions, velocities, weights };
        ens.validate()?;
        Ok(ens)
    }

    pub fn empty() -> Self {
        ParticleEnsemble { positions: Vec::new(), velocities: Vec::new(), weights: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.velocities.len() != n || self.weights.len() != n {
            return Err(Error::param(
                "ensemble",
                format!(
                    "length mismatch: {} positions, {} velocities, {} weights",
                    n,
                    self.velocities.len(),
                    self.weights.len()
                ),
            ));
        }
        if let Some(i) = self.weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights", format!("weight {i} is {}", self.weights[i])));
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if let Some(i) = self.positions.iter().position(|p| !finite(p)) {
            return Err(Error::param("positions", format!("position {i} is not finite")));
        }
        if let Some(i) = self.velocities.iter().position(|p| !finite(p)) {
            return Err(Error::param("velocities", format!("velocity {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sum of weights in index order. Weights never change during a run, so
    /// this value is bitwise constant.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_distance_to(&self, point: &Vec3) -> f64 {
        self.positions.iter().map(|x| (x - point).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn momentum(&self) -> Vec3 {
        self.velocities.iter().zip(&self.weights).fold(Vec3::zeros(), |acc, (v, w)| acc + v * *w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeState {
    pub xi: Vec3,
    pub eta: Vec3,
}

impl ChargeState {
    pub fn new(xi: Vec3, eta: Vec3) -> Result<Self> {
        if xi.iter().chain(eta.iter()).all(|c| c.is_finite()) {
            Ok(ChargeState { xi, eta })
        } else {
            Err(Error::param("charge", "non-finite component"))
        }
    }

    pub fn at_rest(xi: Vec3) -> Self {
        ChargeState { xi, eta: Vec3::zeros() }
    }
}

/// Softening lengths for the two kinds of interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Softening {
    pub plasma: f64,
    pub charge: f64,
}

impl Default for Softening {
    fn default() -> Self {
        Softening { plasma: 0.0, charge: 0.0 }
    }
}

/// Run constants entering the microscopic energy h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReference {
    /// H(0)
    pub h0: f64,
    /// M0, the total plasma mass
    pub mass: f64,
}

impl EnergyReference {
    /// H(0) + 1/M0 + 1; the part of h that does not depend on (x, v).
    pub fn offset(&self) -> f64 {
        let inv_mass = if self.mass > 0.0 { 1.0 / self.mass } else { 0.0 };
        self.h0 + inv_mass + 1.0
    }
}

/// Plasma self-field at the particles and at the charge, valid for the
/// positions it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceCache {
    pub e_particles: Vec<Vec3>,
    pub e_at_xi: Vec3,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub ensemble: ParticleEnsemble,
    pub charge: ChargeState,
    pub softening: Softening,
    pub reference: EnergyReference,
    pub cached_field: Option<GridField>,
    pub(crate) forces: Option<ForceCache>,
}

impl SimState {
    /// Builds a state at t = 0 and records H(0) from it.
    pub fn new(ensemble: ParticleEnsemble, charge: ChargeState, softening: Softening) -> Result<Self> {
        ensemble.validate()?;
        let mass = ensemble.total_mass();
        let mut state = SimState {
            t: 0.0,
            ensemble,
            charge,
            softening,
            reference: EnergyReference { h0: 0.0, mass },
            cached_field: None,
            forces: None,
        };
        state.reference.h0 = crate::diagnostics::total_energy(&state)?;
        Ok(state)
    }

    /// Rebuilds a state from stored parts, keeping the stored H(0) and M0.
    pub fn from_parts(
        t: f64,
        ensemble: ParticleEnsemble,
        charge: ChargeState,
        softening: Softening,
        reference: EnergyReference,
    ) -> Result<Self> {
        ensemble.validate()?;
        Ok(SimState { t, ensemble, charge, softening, reference, cached_field: None, forces: None })
    }

    /// Drops cached fields; call after editing the ensemble or charge by hand.
    pub fn invalidate(&mut self) {
        self.cached_field = None;
        self.forces = None;
    }

    pub fn forces(&self) -> Option<&ForceCache> {
        self.forces.as_ref()
    }
}

/// Uniform node grid holding deposited density and the solved field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub rho: Vec<f64>,
    pub e: Vec<Vec3>,
}

impl GridField {
    pub fn zeros(origin: Vec3, spacing: f64, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        GridField { origin, spacing, dims, rho: vec![0.0; n], e: vec![Vec3::zeros(); n] }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Node sum of rho times the cell volume.
    pub fn total_charge(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn upper_corner(&self) -> Vec3 {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }
}

/// Proof parameters for one choice of (m, m0, T).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub m: f64,
    pub m0: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub f0_l1: f64,
    #[serde(rename = "R_T")]
    pub r_t: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    pub k: f64,
    /// t0 evaluated at the H_m supplied to the builder.
    pub t0: f64,
    #[serde(rename = "H_m")]
    pub h_m: f64,
    /// None outside 16/3 < m < 7.
    pub e_m: Option<f64>,
    pub c0_m: Option<f64>,
}

/// Sorted list of (order, value) pairs. Orders are reals, so this stands in
/// for a map keyed by order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderMap(pub Vec<(f64, f64)>);

impl OrderMap {
    pub fn get(&self, order: f64) -> Option<f64> {
        self.0.iter().find(|(k, _)| (k - order).abs() <= 1e-12 * k.abs().max(1.0)).map(|(_, v)| *v)
    }

    pub fn insert(&mut self, order: f64, value: f64) {
        match self.0.iter_mut().find(|(k, _)| (*k - order).abs() <= 1e-12 * k.abs().max(1.0)) {
            Some(slot) => slot.1 = value,
            None => {
                self.0.push((order, value));
                self.0.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|(k, _)| *k)
    }
}

/// One row of the diagnostic time series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// H̃_k(t)
    pub hk: OrderMap,
    /// H_k(t), running sup of H̃_k over recorded times
    pub hk_sup: OrderMap,
    pub mk: OrderMap,
    pub mk_sup: OrderMap,
    pub lp_rho: OrderMap,
    /// ‖E(t)‖_q; q = ∞ is stored under f64::INFINITY
    pub e_norms: OrderMap,
    pub e_at_xi: f64,
    pub e_at_xi_grid: f64,
    pub eta_norm: f64,
    pub xi_norm: f64,
    pub min_charge_distance: f64,
    pub min_h: f64,
    /// max over particles of |v| / (2 sqrt h)
    pub max_v_over_2sqrt_h: f64,
    pub virial_e_integral: f64,
    pub virial_inverse_sq: f64,
    /// Σ w / |x − ξ|² at this record; kept for the trapezoid rule.
    pub inverse_sq_now: f64,
}

/// Phase-space histogram estimate of ‖f‖_∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfEstimate {
    pub value: f64,
    pub bin_x: f64,
    pub bin_v: f64,
}

/// Bins particles on a 6D lattice of cubes with sides `bin_x` (space) and
/// `bin_v` (velocity) and returns the largest bin weight over the bin volume.
/// Defaults: one standard deviation of the positions (resp. velocities),
/// averaged over axes. The estimate smooths peaks narrower than a bin and is
/// noisy when bins hold few particles; it is never exact.
pub fn estimate_f_linf(ensemble: &ParticleEnsemble, bin_x: Option<f64>, bin_v: Option<f64>) -> Result<LinfEstimate> {
    if ensemble.is_empty() {
        return Err(Error::Missing("cannot estimate ‖f‖∞ of an empty ensemble".into()));
    }
    let bin_x = match bin_x {
        Some(b) => b,
        None => mean_axis_std(&ensemble.positions),
    };
    let bin_v = match bin_v {
        Some(b) => b,
        None => mean_axis_std(&ensemble.velocities),
    };
    if !(bin_x > 0.0 && bin_v > 0.0) {
        return Err(Error::Missing(format!("degenerate histogram bins ({bin_x}, {bin_v})")));
    }
    let mut bins: HashMap<[i64; 6], f64> = HashMap::new();
    for ((x, v), w) in ensemble.positions.iter().zip(&ensemble.velocities).zip(&ensemble.weights) {
        let key = [
            (x.x / bin_x).floor() as i64,
            (x.y / bin_x).floor() as i64,
            (x.z / bin_x).floor() as i64,
            (v.x / bin_v).floor() as i64,
            (v.y / bin_v).floor() as i64,
            (v.z / bin_v).floor() as i64,
        ];
        *bins.entry(key).or_insert(0.0) += w;
    }
    let peak = bins.values().cloned().fold(0.0, f64::max);
    Ok(LinfEstimate { value: peak / (bin_x.powi(3) * bin_v.powi(3)), bin_x, bin_v })
}

fn mean_axis_std(points: &[Vec3]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let var = points.iter().fold(Vec3::zeros(), |a, p| a + (p - mean).component_mul(&(p - mean))) / n;
    (var.x.sqrt() + var.y.sqrt() + var.z.sqrt()) / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentHypothesis {
    pub m: f64,
    pub value: f64,
    pub finite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub total_mass: f64,
    pub lambda: f64,
    pub mass_below_lambda: bool,
    pub moments: Vec<MomentHypothesis>,
    pub moments_finite: bool,
    pub warnings: Vec<String>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.mass_below_lambda && self.moments_finite
    }
}

/// Orders tested by [`validate_theorem_hypotheses`]: the integers below m0
/// (capped at 12) together with `table.m`.
pub fn hypothesis_orders(table: &ConstantsTable) -> Vec<f64> {
    let cap = table.m0.min(12.0);
    let mut ms: Vec<f64> = (0..=12).map(f64::from).filter(|m| *m < cap).collect();
    if table.m < table.m0 && !ms.iter().any(|m| (m - table.m).abs() < 1e-12) {
        ms.push(table.m);
    }
    ms.sort_by(f64::total_cmp);
    ms
}

/// Checks the two hypotheses of the existence theorem on an ensemble:
/// total mass below λ, and finiteness of Σ w (|v|² + 1/|x − ξ|)^{m/2} for
/// the orders of [`hypothesis_orders`]. Violations become warnings.
pub fn validate_theorem_hypotheses(
    ensemble: &ParticleEnsemble,
    charge: &ChargeState,
    table: &ConstantsTable,
) -> HypothesisReport {
    let mut warnings = Vec::new();
    let total_mass = ensemble.total_mass();
    let mass_below_lambda = total_mass < table.lambda;
    if !mass_below_lambda {
        warnings.push(format!(
            "total mass {total_mass} is not below lambda = {}; the smallness hypothesis fails",
            table.lambda
        ));
    }
    let mut moments = Vec::new();
    for m in hypothesis_orders(table) {
        let value: f64 = ensemble
            .positions
            .iter()
            .zip(&ensemble.velocities)
            .zip(&ensemble.weights)
            .map(|((x, v), w)| {
                let base = v.norm_squared() + 1.0 / (x - charge.xi).norm();
                w * base.powf(m / 2.0)
            })
            .sum();
        let finite = value.is_finite();
        if !finite {
            warnings.push(format!("moment of order {m} is not finite"));
        }
        moments.push(MomentHypothesis { m, value, finite });
    }
    let moments_finite = moments.iter().all(|m| m.finite);
    HypothesisReport { total_mass, lambda: table.lambda, mass_below_lambda, moments, moments_finite, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(m0: f64, lambda: f64) -> ConstantsTable {
        ConstantsTable {
            m: 4.0,
            m0,
            t_final: 1.0,
            k0: 100.0,
            f0_l1: 0.5,
            r_t: 1.0,
            lambda,
            gamma: 0.1,
            delta: 0.01,
            k: 4.7,
            t0: 1.0,
            h_m: 1.0,
            e_m: None,
            c0_m: None,
        }
    }

    #[test]
    fn ensemble_rejects_mismatched_lengths() {
        let r = ParticleEnsemble::new(vec![Vec3::zeros()], vec![], vec![1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn ensemble_rejects_negative_weight() {
        let r = ParticleEnsemble::new(vec![Vec3::zeros()], vec![Vec3::zeros()], vec![-1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn mass_hypothesis_direct_comparison() {
        let charge = ChargeState::at_rest(Vec3::zeros());
        let ens = ParticleEnsemble::new(vec![Vec3::x()], vec![Vec3::zeros()], vec![0.5]).unwrap();
        let rep = validate_theorem_hypotheses(&ens, &charge, &table(7.0, 1.0));
        assert!(rep.mass_below_lambda && rep.pass());
        let ens = ParticleEnsemble::new(vec![Vec3::x()], vec![Vec3::zeros()], vec![1.5]).unwrap();
        let rep = validate_theorem_hypotheses(&ens, &charge, &table(7.0, 1.0));
        assert!(!rep.mass_below_lambda);
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn single_particle_moment_is_one_term() {
        let charge = ChargeState::at_rest(Vec3::zeros());
        let ens = ParticleEnsemble::new(vec![Vec3::x()], vec![Vec3::zeros()], vec![0.3]).unwrap();
        let rep = validate_theorem_hypotheses(&ens, &charge, &table(7.0, 1.0));
        let m4 = rep.moments.iter().find(|m| m.m == 4.0).unwrap();
        assert_eq!(m4.value, 0.3);
        assert!(m4.finite);
    }

    #[test]
    fn order_map_roundtrip() {
        let mut m = OrderMap::default();
        m.insert(6.0, 1.0);
        m.insert(2.0, 3.0);
        m.insert(6.0, 2.0);
        assert_eq!(m.0, vec![(2.0, 3.0), (6.0, 2.0)]);
        assert_eq!(m.get(6.0), Some(2.0));
        assert_eq!(m.get(4.0), None);
    }

    #[test]
    fn linf_histogram_of_one_point() {
        let ens = ParticleEnsemble::new(vec![Vec3::zeros()], vec![Vec3::zeros()], vec![2.0]).unwrap();
        let est = estimate_f_linf(&ens, Some(0.5), Some(2.0)).unwrap();
        assert!((est.value - 2.0 / (0.125 * 8.0)).abs() < 1e-15);
    }
}
