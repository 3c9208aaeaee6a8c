use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ext_field_at, ExtSource};
use crate::model::{Mat3, Vec3};

/// A time-dependent field G(τ, x) with its spatial Jacobian.
pub trait ExternalField: Sync {
    fn eval(&self, tau: f64, x: &Vec3) -> (Vec3, Mat3);
}

pub struct ZeroField;

impl ExternalField for ZeroField {
    fn eval(&self, _tau: f64, _x: &Vec3) -> (Vec3, Mat3) {
        (Vec3::zeros(), Mat3::zeros())
    }
}

/// G(x) = A x.
pub struct LinearField(pub Mat3);

impl ExternalField for LinearField {
    fn eval(&self, _tau: f64, x: &Vec3) -> (Vec3, Mat3) {
        (self.0 * x, self.0)
    }
}

/// E_ext + F_ext of a frozen configuration.
pub struct StaticField(pub ExtSource);

impl ExternalField for StaticField {
    fn eval(&self, _tau: f64, x: &Vec3) -> (Vec3, Mat3) {
        ext_field_at(&self.0, x)
    }
}

/// E_ext + F_ext along a stored run: evaluated at the two snapshots that
/// bracket τ and interpolated linearly in time; clamped outside the range.
pub struct RunFieldHistory {
    pub times: Vec<f64>,
    pub sources: Vec<ExtSource>,
}

impl RunFieldHistory {
    pub fn new(times: Vec<f64>, sources: Vec<ExtSource>) -> Result<Self> {
        if times.is_empty() || times.len() != sources.len() {
            return Err(Error::Missing("field history needs one source per stored time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Series("field history times must increase".into()));
        }
        Ok(RunFieldHistory { times, sources })
    }
}

impl ExternalField for RunFieldHistory {
    fn eval(&self, tau: f64, x: &Vec3) -> (Vec3, Mat3) {
        let n = self.times.len();
        if n == 1 || tau <= self.times[0] {
            return ext_field_at(&self.sources[0], x);
        }
        if tau >= self.times[n - 1] {
            return ext_field_at(&self.sources[n - 1], x);
        }
        let k = self.times.partition_point(|t| *t <= tau) - 1;
        let th = (tau - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let (a, da) = ext_field_at(&self.sources[k], x);
        if th == 0.0 {
            return (a, da);
        }
        let (b, db) = ext_field_at(&self.sources[k + 1], x);
        (a * (1.0 - th) + b * th, da * (1.0 - th) + db * th)
    }
}

/// One point of a backward flow with its Jacobian blocks and the derived
/// matrices. The P's are normalized so that for s > 0
/// D_xX = I + P1, D_vX = −s(I + P2), D_xV = s P3, D_vV = I + s P4,
/// M⁻¹ = I + s P5 and N = s P6; at s = 0 they hold their limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowProbe {
    pub t: f64,
    pub s: f64,
    pub x: Vec3,
    pub v: Vec3,
    #[serde(rename = "X")]
    pub big_x: Vec3,
    #[serde(rename = "V")]
    pub big_v: Vec3,
    pub dxx: Mat3,
    pub dvx: Mat3,
    pub dxv: Mat3,
    pub dvv: Mat3,
    pub p1: Mat3,
    pub p2: Mat3,
    pub p3: Mat3,
    pub p4: Mat3,
    pub p5: Mat3,
    pub p6: Mat3,
    pub m_mat: Mat3,
    pub n_mat: Mat3,
}

impl FlowProbe {
    pub fn jacobian(&self) -> Matrix6<f64> {
        let mut j = Matrix6::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.dxx);
        j.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.dvx);
        j.fixed_view_mut::<3, 3>(3, 0).copy_from(&self.dxv);
        j.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.dvv);
        j
    }

    fn build(t: f64, s: f64, x: Vec3, v: Vec3, y: &State, field: &dyn ExternalField) -> Result<FlowProbe> {
        let big_x = Vec3::new(y[0], y[1], y[2]);
        let big_v = Vec3::new(y[3], y[4], y[5]);
        let blk = |r0: usize, c0: usize| Mat3::from_fn(|r, c| y[6 + 6 * (r0 + r) + c0 + c]);
        let (dxx, dvx, dxv, dvv) = (blk(0, 0), blk(0, 3), blk(3, 0), blk(3, 3));
        let id = Mat3::identity();
        let p1 = dxx - id;
        let dxx_inv = dxx.try_inverse().ok_or_else(|| {
            Error::Inversion(format!("D_xX is singular at s = {s}; the bound |(D_xX)^-1| <= 2 fails (|P1| >= 1)"))
        })?;
        let m_inv = dvv - dxv * dxx_inv * dvx;
        let m_mat = m_inv.try_inverse().ok_or_else(|| {
            Error::Inversion(format!("D_vV - D_xV (D_xX)^-1 D_vX is singular at s = {s}; the bound |M| <= 2 fails"))
        })?;
        let n_mat = dxx_inv * dvx * m_mat;
        let (p2, p3, p4, p5, p6) = if s > 0.0 {
            (-dvx / s - id, dxv / s, (dvv - id) / s, (m_inv - id) / s, n_mat / s)
        } else {
            let (_, dg) = field.eval(t, &x);
            (Mat3::zeros(), -dg, Mat3::zeros(), Mat3::zeros(), -id)
        };
        Ok(FlowProbe { t, s, x, v, big_x, big_v, dxx, dvx, dxv, dvv, p1, p2, p3, p4, p5, p6, m_mat, n_mat })
    }
}

const DIM: usize = 42;
type State = [f64; DIM];

fn rhs(t: f64, s: f64, y: &State, field: &dyn ExternalField) -> State {
    let x = Vec3::new(y[0], y[1], y[2]);
    let (g, dg) = field.eval(t - s, &x);
    let mut d = [0.0; DIM];
    for i in 0..3 {
        d[i] = -y[3 + i];
        d[3 + i] = -g[i];
    }
    for c in 0..6 {
        for r in 0..3 {
            d[6 + 6 * r + c] = -y[6 + 6 * (3 + r) + c];
            let mut acc = 0.0;
            for k in 0..3 {
                acc += dg[(r, k)] * y[6 + 6 * k + c];
            }
            d[6 + 6 * (3 + r) + c] = -acc;
        }
    }
    d
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Dormand–Prince 5(4) from s0 to s1 in place with mixed absolute/relative
/// error control at `tol`; `h` carries the step size between calls.
pub(crate) fn dp45<const N: usize>(
    y: &mut [f64; N],
    s0: f64,
    s1: f64,
    h: &mut f64,
    tol: f64,
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
) -> Result<()> {
    let mut s = s0;
    let mut steps = 0usize;
    while s < s1 {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::Series(format!("flow integration stalled at s = {s}")));
        }
        let last = *h >= s1 - s;
        let hh = if last { s1 - s } else { *h };
        let mut k = [[0.0; N]; 7];
        for st in 0..7 {
            let mut ys = *y;
            for (j, a) in A[st].iter().enumerate().take(st) {
                if *a != 0.0 {
                    for i in 0..N {
                        ys[i] += hh * a * k[j][i];
                    }
                }
            }
            k[st] = rhs(s + C[st] * hh, &ys);
        }
        let mut ynew = *y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for st in 0..7 {
                d5 += B5[st] * k[st][i];
                d4 += B4[st] * k[st][i];
            }
            ynew[i] += hh * d5;
            let sc = tol + tol * y[i].abs().max(ynew[i].abs());
            err = err.max((hh * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Series(format!("flow integration produced non-finite values at s = {s}")));
        }
        if err <= 1.0 {
            s = if last { s1 } else { s + hh };
            *y = ynew;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if !(last && err <= 1.0) {
            *h = hh * factor;
        }
    }
    Ok(())
}

pub const FLOW_TOL: f64 = 1e-10;

/// Backward characteristics dX/ds = −V, dV/ds = −G(t − s, X) from
/// (X, V)(0) = (x, v), together with the 6×6 Jacobian of (X, V) in (x, v),
/// reported at each s of `s_grid` (nondecreasing, within [0, t]).
pub fn backward_flow(t: f64, s_grid: &[f64], x: Vec3, v: Vec3, field: &dyn ExternalField) -> Result<Vec<FlowProbe>> {
    backward_flow_tol(t, s_grid, x, v, field, FLOW_TOL)
}

pub fn backward_flow_tol(
    t: f64,
    s_grid: &[f64],
    x: Vec3,
    v: Vec3,
    field: &dyn ExternalField,
    tol: f64,
) -> Result<Vec<FlowProbe>> {
    if s_grid.iter().any(|s| !(*s >= 0.0 && *s <= t)) {
        return Err(Error::param("s_grid", format!("every s must lie in [0, t = {t}]")));
    }
    if s_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("s_grid", "values must be nondecreasing"));
    }
    let mut y = [0.0; DIM];
    for i in 0..3 {
        y[i] = x[i];
        y[3 + i] = v[i];
    }
    for i in 0..6 {
        y[6 + 7 * i] = 1.0;
    }
    let mut s = 0.0;
    let mut h = (t / 16.0).max(1e-6);
    let mut out = Vec::with_capacity(s_grid.len());
    for &target in s_grid {
        if target > s {
            dp45(&mut y, s, target, &mut h, tol, |ss, yy| rhs(t, ss, yy, field))?;
            s = target;
        }
        out.push(FlowProbe::build(t, s, x, v, &y, field)?);
    }
    Ok(out)
}

/// A probe together with probes started from (x, v) ± step·e_j for the six
/// phase-space directions, for second derivatives by central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBundle {
    pub step: f64,
    pub probes: Vec<FlowProbe>,
    pub plus: Vec<Vec<FlowProbe>>,
    pub minus: Vec<Vec<FlowProbe>>,
}

pub fn probe_bundle(
    t: f64,
    s_grid: &[f64],
    x: Vec3,
    v: Vec3,
    field: &dyn ExternalField,
    step: f64,
) -> Result<ProbeBundle> {
    let probes = backward_flow(t, s_grid, x, v, field)?;
    let mut plus = Vec::with_capacity(6);
    let mut minus = Vec::with_capacity(6);
    for j in 0..6 {
        let mut dx = Vec3::zeros();
        let mut dv = Vec3::zeros();
        if j < 3 {
            dx[j] = step;
        } else {
            dv[j - 3] = step;
        }
        plus.push(backward_flow(t, s_grid, x + dx, v + dv, field)?);
        minus.push(backward_flow(t, s_grid, x - dx, v - dv, field)?);
    }
    Ok(ProbeBundle { step, probes, plus, minus })
}

impl ProbeBundle {
    /// max over j, k of |∂_j∂_k X| + |∂_j∂_k V| at grid index `i`, with
    /// j, k running over (x1, x2, x3, v1, v2, v3).
    pub fn second_derivative_max(&self, i: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..6 {
            let d = (self.plus[j][i].jacobian() - self.minus[j][i].jacobian()) / (2.0 * self.step);
            for k in 0..6 {
                let col = d.column(k);
                let dx = Vec3::new(col[0], col[1], col[2]).norm();
                let dv = Vec3::new(col[3], col[4], col[5]).norm();
                worst = worst.max(dx + dv);
            }
        }
        worst
    }

    /// div_v(ᵗM), the vector with components Σ_j ∂_{v_j} M_{ji}.
    pub fn div_v_mt(&self, i: usize) -> Vec3 {
        let mut out = Vec3::zeros();
        for j in 0..3 {
            let d = (self.plus[3 + j][i].m_mat - self.minus[3 + j][i].m_mat) / (2.0 * self.step);
            for c in 0..3 {
                out[c] += d[(j, c)];
            }
        }
        out
    }

    /// div_x(ᵗN), the vector with components Σ_j ∂_{x_j} N_{ji}.
    pub fn div_x_nt(&self, i: usize) -> Vec3 {
        let mut out = Vec3::zeros();
        for j in 0..3 {
            let d = (self.plus[j][i].n_mat - self.minus[j][i].n_mat) / (2.0 * self.step);
            for c in 0..3 {
                out[c] += d[(j, c)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_at_zero_is_identity() {
        let p = backward_flow(1.0, &[0.0], Vec3::x(), Vec3::y(), &ZeroField).unwrap();
        assert_eq!(p[0].big_x, Vec3::x());
        assert_eq!(p[0].big_v, Vec3::y());
        assert_eq!(p[0].dxx, Mat3::identity());
        assert_eq!(p[0].dvx, Mat3::zeros());
        assert_eq!(p[0].dxv, Mat3::zeros());
        assert_eq!(p[0].dvv, Mat3::identity());
    }

    #[test]
    fn rejects_s_outside_range() {
        assert!(backward_flow(1.0, &[0.5, 1.5], Vec3::x(), Vec3::y(), &ZeroField).is_err());
        assert!(backward_flow(1.0, &[0.5, 0.2], Vec3::x(), Vec3::y(), &ZeroField).is_err());
    }
}
