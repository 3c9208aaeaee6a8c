use serde::{Deserialize, Serialize};

use super::flow::ProbeBundle;
use crate::model::{ConstantsTable, Mat3};

/// Operator 2-norm.
pub(crate) fn spectral(m: &Mat3) -> f64 {
    m.singular_values().max()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub bound: String,
    pub worst_ratio: f64,
    /// (probe index, s) where the worst ratio occurred
    pub worst_at: (usize, f64),
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowBoundReport {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub f0_l1: f64,
    pub probes: usize,
    pub tolerance: f64,
    pub entries: Vec<BoundEntry>,
    pub pass: bool,
}

impl FlowBoundReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.worst_ratio).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect()
    }
}

/// Worst observed/bound ratios of the flow estimates over all probes and
/// all s > 0. Norms of matrices are operator 2-norms. The cutoff radius is
/// `table.r_t`, which must be the one the probes were generated with.
pub fn flow_bound_report(bundles: &[ProbeBundle], table: &ConstantsTable, f0_l1: f64) -> FlowBoundReport {
    let r = table.r_t;
    let t_final = table.t_final;
    let k0 = table.k0;
    let c = 1.0 + f0_l1;
    let small = (1.0 / k0) * 1f64.min(1.0 / (t_final * t_final));
    type Ratio = Box<dyn Fn(&ProbeBundle, usize) -> f64>;
    let checks: Vec<(&str, String, Ratio)> = vec![
        (
            "position_deviation",
            "|X - (x - v s)| <= (1+|f0|_1) s^2 / (2 R^2)".into(),
            Box::new(move |b, i| {
                let p = &b.probes[i];
                (p.big_x - (p.x - p.v * p.s)).norm() / (c * p.s * p.s / (2.0 * r * r))
            }),
        ),
        (
            "velocity_deviation",
            "|V - v| <= (1+|f0|_1) s / R^2".into(),
            Box::new(move |b, i| {
                let p = &b.probes[i];
                (p.big_v - p.v).norm() / (c * p.s / (r * r))
            }),
        ),
        (
            "velocity_jacobian_norms",
            "|D_vX| + |D_vV| <= 4 (1+T)".into(),
            Box::new(move |b, i| {
                let p = &b.probes[i];
                (spectral(&p.dvx) + spectral(&p.dvv)) / (4.0 * (1.0 + t_final))
            }),
        ),
        (
            "space_jacobian_norms",
            "|D_xX| + |D_xV| <= 4 (1+T)".into(),
            Box::new(move |b, i| {
                let p = &b.probes[i];
                (spectral(&p.dxx) + spectral(&p.dxv)) / (4.0 * (1.0 + t_final))
            }),
        ),
        ("p1_norm", "|P1| <= 1/K0".into(), Box::new(move |b, i| spectral(&b.probes[i].p1) * k0)),
        ("p2_norm", "|P2| <= 1/K0".into(), Box::new(move |b, i| spectral(&b.probes[i].p2) * k0)),
        ("p3_norm", "|P3| <= min(1, 1/T^2)/K0".into(), Box::new(move |b, i| spectral(&b.probes[i].p3) / small)),
        ("p4_norm", "|P4| <= min(1, 1/T^2)/K0".into(), Box::new(move |b, i| spectral(&b.probes[i].p4) / small)),
        (
            "inverse_det_dvx",
            "|det D_vX|^-1 <= 8 s^-3".into(),
            Box::new(|b, i| {
                let p = &b.probes[i];
                (1.0 / p.dvx.determinant().abs()) / (8.0 / p.s.powi(3))
            }),
        ),
        (
            "inverse_dxx_norm",
            "|(D_xX)^-1| <= 2".into(),
            Box::new(|b, i| {
                let inv = b.probes[i].dxx.try_inverse().map(|m| spectral(&m)).unwrap_or(f64::INFINITY);
                inv / 2.0
            }),
        ),
        ("m_norm", "|M| <= 2".into(), Box::new(|b, i| spectral(&b.probes[i].m_mat) / 2.0)),
        (
            "n_norm",
            "|N| <= 8 s".into(),
            Box::new(|b, i| {
                let p = &b.probes[i];
                spectral(&p.n_mat) / (8.0 * p.s)
            }),
        ),
        (
            "second_derivatives",
            "max_jk |d_j d_k X| + |d_j d_k V| <= 2".into(),
            Box::new(|b, i| b.second_derivative_max(i) / 2.0),
        ),
    ];
    let tolerance = 1e-6;
    let mut entries = Vec::new();
    for (name, bound, ratio) in &checks {
        let mut worst = 0.0;
        let mut at = (0, 0.0);
        for (bi, b) in bundles.iter().enumerate() {
            for (i, p) in b.probes.iter().enumerate() {
                if p.s <= 0.0 {
                    continue;
                }
                let q = ratio(b, i);
                if q > worst || q.is_nan() {
                    worst = if q.is_nan() { f64::INFINITY } else { q };
                    at = (bi, p.s);
                }
            }
        }
        entries.push(BoundEntry {
            name: name.to_string(),
            bound: bound.clone(),
            worst_ratio: worst,
            worst_at: at,
            pass: worst <= 1.0 + tolerance,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    FlowBoundReport { r, k0, t_final, f0_l1, probes: bundles.len(), tolerance, entries, pass }
}
