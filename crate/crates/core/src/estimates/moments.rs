use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConstantsTable, DiagnosticRecord};

fn check_times(records: &[DiagnosticRecord], min: usize) -> Result<()> {
    if records.len() < min {
        return Err(Error::Series(format!("need at least {min} records, got {}", records.len())));
    }
    if let Some(w) = records.windows(2).find(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Series(format!("time grid is not increasing at t = {} -> {}", w[0].t, w[1].t)));
    }
    Ok(())
}

fn need(v: Option<f64>, what: &str, t: f64) -> Result<f64> {
    v.ok_or_else(|| Error::Missing(format!("record at t = {t} has no {what}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratedCheck {
    /// 2^{k+2} max(1, (C/(k+3))^{k+3}) with C the largest differential ratio.
    pub constant: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentOdeReport {
    pub k: f64,
    /// (t, ratio) at interior records.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub finite: bool,
    pub integrated: IntegratedCheck,
    pub pass: bool,
}

/// Ratio of the centred difference of H̃_k to
/// (‖E‖_{k+3} + |E(ξ)|) H_k^{(k+2)/(k+3)} at every interior record, and the
/// integrated form H_k(t) ≤ C_int {H_k(0) + (∫_0^t ‖E‖_{k+3} + |E(ξ)|)^{k+3}}.
///
/// With A = ‖E‖ + |E(ξ)| and y = H_k, y' ≤ C A y^{(k+2)/(k+3)} integrates to
/// y^{1/(k+3)}(t) ≤ y^{1/(k+3)}(0) + (C/(k+3))∫A, and (a + b)^{k+3} ≤
/// 2^{k+2}(a^{k+3} + b^{k+3}) gives C_int.
pub fn check_moment_ode(records: &[DiagnosticRecord], k: f64) -> Result<MomentOdeReport> {
    check_times(records, 3)?;
    let q = k + 3.0;
    let mut drive = Vec::with_capacity(records.len());
    let mut h_tilde = Vec::with_capacity(records.len());
    let mut h_sup = Vec::with_capacity(records.len());
    for r in records {
        let e = need(r.e_norms.get(q), &format!("‖E‖_{q}"), r.t)?;
        drive.push(e + r.e_at_xi);
        h_tilde.push(need(r.hk.get(k), &format!("H~_{k}"), r.t)?);
        h_sup.push(need(r.hk_sup.get(k), &format!("H_{k}"), r.t)?);
    }
    let mut ratios = Vec::new();
    for i in 1..records.len() - 1 {
        let dh = (h_tilde[i + 1] - h_tilde[i - 1]) / (records[i + 1].t - records[i - 1].t);
        let den = drive[i] * h_sup[i].powf((k + 2.0) / q);
        let r = if dh == 0.0 { 0.0 } else { dh / den };
        ratios.push((records[i].t, r));
    }
    let finite = ratios.iter().all(|(_, r)| r.is_finite());
    let max_ratio = ratios.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);

    let c = max_ratio.max(0.0);
    let constant = 2f64.powf(k + 2.0) * (c / q).powf(q).max(1.0);
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..records.len() {
        if i > 0 {
            integral += 0.5 * (records[i].t - records[i - 1].t) * (drive[i] + drive[i - 1]);
        }
        let bound = constant * (h_sup[0] + integral.powf(q));
        worst = worst.max(h_sup[i] / bound);
    }
    let integrated = IntegratedCheck { constant, max_ratio: worst, pass: worst <= 1.0 };
    Ok(MomentOdeReport { k, pass: finite && integrated.pass, ratios, max_ratio, finite, integrated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyVelocityReport {
    pub k: f64,
    /// max over records of M_k / (2^k H_k), instantaneous and running sup.
    pub max_ratio: f64,
    pub max_sup_ratio: f64,
    /// max |v| / (2√h) over all particles and records.
    pub max_pointwise: f64,
    pub pass: bool,
}

/// M_k ≤ 2^k H_k on every record, from |v| ≤ 2√h.
pub fn check_energy_velocity(records: &[DiagnosticRecord], k: f64) -> Result<EnergyVelocityReport> {
    check_times(records, 1)?;
    let scale = 2f64.powf(k);
    let mut max_ratio: f64 = 0.0;
    let mut max_sup_ratio: f64 = 0.0;
    let mut max_pointwise: f64 = 0.0;
    for r in records {
        let mk = need(r.mk.get(k), &format!("M_{k}"), r.t)?;
        let hk = need(r.hk.get(k), &format!("H~_{k}"), r.t)?;
        let mks = need(r.mk_sup.get(k), &format!("sup M_{k}"), r.t)?;
        let hks = need(r.hk_sup.get(k), &format!("H_{k}"), r.t)?;
        max_ratio = max_ratio.max(mk / (scale * hk));
        max_sup_ratio = max_sup_ratio.max(mks / (scale * hks));
        max_pointwise = max_pointwise.max(r.max_v_over_2sqrt_h);
    }
    let pass = max_ratio <= 1.0 && max_sup_ratio <= 1.0 && max_pointwise <= 1.0;
    Ok(EnergyVelocityReport { k, max_ratio, max_sup_ratio, max_pointwise, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialReport {
    pub m: f64,
    pub slope: f64,
    pub intercept: f64,
    pub tail_start: f64,
    pub points: usize,
    pub c0: f64,
    pub pass: bool,
}

/// Least-squares slope of log H_m against log(1 + t) over the second half of
/// the run, compared with c0(m) from the table.
pub fn check_polynomial_bound(
    records: &[DiagnosticRecord],
    m: f64,
    table: &ConstantsTable,
) -> Result<PolynomialReport> {
    check_times(records, 3)?;
    let t_end = records[records.len() - 1].t;
    if t_end < 2.0 {
        return Err(Error::Series(format!("run length {t_end} is shorter than 2")));
    }
    if !(m < table.m0.min(7.0)) {
        return Err(Error::param("m", format!("{m} must be below min(m0 = {}, 7)", table.m0)));
    }
    let c0 = table.c0_m.ok_or_else(|| Error::Missing(format!("constants table has no c0 for m = {}", table.m)))?;
    let tail_start = 0.5 * t_end;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records.iter().filter(|r| r.t >= tail_start) {
        let h = need(r.hk_sup.get(m), &format!("H_{m}"), r.t)?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Series(format!("H_{m} = {h} at t = {}", r.t)));
        }
        xs.push((1.0 + r.t).ln());
        ys.push(h.ln());
    }
    if xs.len() < 2 {
        return Err(Error::Series("fewer than two records in the fit window".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(PolynomialReport { m, slope, intercept: my - slope * mx, tail_start, points: xs.len(), c0, pass: slope <= c0 })
}

pub const VIRIAL_TOL: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a: f64,
    /// max over t of I(t) / (a(1 + t)).
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    pub field_at_charge: Envelope,
    pub inverse_square: Envelope,
    pub tolerance: f64,
    pub pass: bool,
}

/// Fits I(t) ≈ a(1 + t) by least squares through the origin in (1 + t).
pub fn linear_envelope(ts: &[f64], values: &[f64]) -> Envelope {
    let num: f64 = ts.iter().zip(values).map(|(t, v)| v * (1.0 + t)).sum();
    let den: f64 = ts.iter().map(|t| (1.0 + t).powi(2)).sum();
    let a = num / den;
    let max_ratio =
        ts.iter().zip(values).map(|(t, v)| if *v == 0.0 { 0.0 } else { v / (a * (1.0 + t)) }).fold(0.0, f64::max);
    Envelope { a, max_ratio }
}

/// Linear envelopes of the running ∫|E(s, ξ)| ds and ∫Σw/|x − ξ|² ds.
pub fn check_virial(records: &[DiagnosticRecord]) -> Result<VirialReport> {
    check_times(records, 2)?;
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let e: Vec<f64> = records.iter().map(|r| r.virial_e_integral).collect();
    let inv: Vec<f64> = records.iter().map(|r| r.virial_inverse_sq).collect();
    let field_at_charge = linear_envelope(&ts, &e);
    let inverse_square = linear_envelope(&ts, &inv);
    let pass = field_at_charge.max_ratio <= VIRIAL_TOL && inverse_square.max_ratio <= VIRIAL_TOL;
    Ok(VirialReport { field_at_charge, inverse_square, tolerance: VIRIAL_TOL, pass })
}

pub const ENERGY_DRIFT_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub mass_drift: f64,
    pub energy_rel_drift: f64,
    /// max over records of |η(t)| − √(2H(0)).
    pub eta_excess: f64,
    /// max over records of |ξ(t)| − |ξ0| − √(2H(0)) t.
    pub xi_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Mass exactly constant, energy drift, and the speed and distance bounds on
/// the charge, with the energy-drift allowance on the last two.
pub fn check_conservation(records: &[DiagnosticRecord]) -> Result<ConservationReport> {
    check_times(records, 1)?;
    let first = &records[0];
    let h0 = first.energy;
    let vmax = (2.0 * h0).sqrt();
    let mut mass_drift: f64 = 0.0;
    let mut energy_rel_drift: f64 = 0.0;
    let mut eta_excess = f64::NEG_INFINITY;
    let mut xi_excess = f64::NEG_INFINITY;
    for r in records {
        mass_drift = mass_drift.max((r.mass - first.mass).abs());
        energy_rel_drift = energy_rel_drift.max(((r.energy - h0) / h0).abs());
        eta_excess = eta_excess.max(r.eta_norm - vmax);
        xi_excess = xi_excess.max(r.xi_norm - first.xi_norm - vmax * (r.t - first.t));
    }
    let tol = ENERGY_DRIFT_TOL;
    let pass = mass_drift == 0.0 && energy_rel_drift <= tol && eta_excess <= tol && xi_excess <= tol;
    Ok(ConservationReport { mass_drift, energy_rel_drift, eta_excess, xi_excess, tolerance: tol, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrowthReport {
    /// (q, max_t ‖E(t)‖_q / ‖E(0)‖_q).
    pub growth: Vec<(f64, f64)>,
    pub limit: f64,
    pub pass: bool,
}

/// Regression guard: ‖E(t)‖_q stays within `limit` times its initial value
/// for every recorded q in (3/2, 15/4].
pub fn check_field_growth(records: &[DiagnosticRecord], limit: f64) -> Result<FieldGrowthReport> {
    check_times(records, 1)?;
    let mut growth = Vec::new();
    for q in records[0].e_norms.orders().filter(|q| *q > 1.5 && *q <= 3.75) {
        let e0 = need(records[0].e_norms.get(q), &format!("‖E‖_{q}"), records[0].t)?;
        let mut g: f64 = 0.0;
        for r in records {
            let e = need(r.e_norms.get(q), &format!("‖E‖_{q}"), r.t)?;
            g = g.max(if e0 > 0.0 {
                e / e0
            } else if e == 0.0 {
                1.0
            } else {
                f64::INFINITY
            });
        }
        growth.push((q, g));
    }
    let pass = growth.iter().all(|(_, g)| *g <= limit);
    Ok(FieldGrowthReport { growth, limit, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OrderMap;

    fn rec(t: f64, h: f64) -> DiagnosticRecord {
        let mut r = DiagnosticRecord { t, ..Default::default() };
        r.hk = OrderMap(vec![(2.0, h)]);
        r.hk_sup = OrderMap(vec![(2.0, h)]);
        r.e_norms = OrderMap(vec![(5.0, 1.0)]);
        r.e_at_xi = 0.5;
        r
    }

    #[test]
    fn static_series_has_zero_ratio() {
        let rs: Vec<_> = (0..5).map(|i| rec(i as f64, 2.0)).collect();
        let rep = check_moment_ode(&rs, 2.0).unwrap();
        assert!(rep.ratios.iter().all(|(_, r)| *r == 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn nonmonotone_time_errors() {
        let rs = vec![rec(0.0, 1.0), rec(1.0, 1.0), rec(0.5, 1.0)];
        assert!(check_moment_ode(&rs, 2.0).is_err());
    }

    #[test]
    fn exact_line_has_unit_envelope() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let vs: Vec<f64> = ts.iter().map(|t| 0.7 * (1.0 + t)).collect();
        let e = linear_envelope(&ts, &vs);
        assert!((e.a - 0.7).abs() < 1e-14);
        assert!((e.max_ratio - 1.0).abs() < 1e-14);
    }
}
