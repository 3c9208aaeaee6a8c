//! Parameter algebra of the moment-propagation argument: cutoff radius,
//! admissible γ, (δ, k), t0, the exponent e(m) and the growth degree c0(m).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConstantsTable;

pub const K0_MIN: f64 = 100.0;
/// Lower end of the range of m where e(m) and c0(m) are defined.
pub const M_LOW: f64 = 16.0 / 3.0;
pub const M_HIGH: f64 = 7.0;

/// R(T) = (24 K0 (1 + ‖f0‖₁))^{1/3} (1 + T).
pub fn radius_r(t: f64, f0_l1: f64, k0: f64) -> Result<f64> {
    if !(k0 >= K0_MIN) {
        return Err(Error::param("K0", format!("K0 = {k0} but K0 >= 100 is required")));
    }
    if !(t >= 0.0) {
        return Err(Error::param("T", format!("T = {t} must be nonnegative")));
    }
    if !(f0_l1 >= 0.0) {
        return Err(Error::param("f0_l1", format!("‖f0‖₁ = {f0_l1} must be nonnegative")));
    }
    Ok((24.0 * k0 * (1.0 + f0_l1)).cbrt() * (1.0 + t))
}

/// Admissible γ for the Duhamel step: the open interval (0, hi), closed at
/// hi when `hi_closed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub hi: f64,
    pub hi_closed: bool,
    /// Which constraint sets `hi`.
    pub binding: String,
}

impl GammaInterval {
    pub fn contains(&self, gamma: f64) -> bool {
        gamma > 0.0 && (gamma < self.hi || (self.hi_closed && gamma == self.hi))
    }
}

pub fn gamma_admissible(m: f64, m0: f64) -> Result<GammaInterval> {
    if !(m > 3.0 && m < m0) {
        return Err(Error::EmptyInterval(format!("need 3 < m < m0, got m = {m}, m0 = {m0}")));
    }
    let mut best = GammaInterval { hi: 1.0, hi_closed: false, binding: "gamma < 1".into() };
    let moment = (m0 - m) / (m + 3.0);
    if moment <= best.hi {
        best = GammaInterval { hi: moment, hi_closed: false, binding: "gamma < (m0 - m)/(m + 3)".into() };
    }
    if m < 6.0 {
        let low = (m - 3.0) / (6.0 - m);
        if low < best.hi {
            best = GammaInterval { hi: low, hi_closed: true, binding: "gamma <= (m - 3)/(6 - m)".into() };
        }
    }
    if !(best.hi > 0.0) {
        return Err(Error::EmptyInterval(format!("{} leaves no gamma > 0", best.binding)));
    }
    Ok(best)
}

/// δ = γ / (1 + (γ + 1)(m + 3)) and k = (m + 3)(1 + γ) − 3.
pub fn delta_k_of(gamma: f64, m: f64) -> (f64, f64) {
    let delta = gamma / (1.0 + (gamma + 1.0) * (m + 3.0));
    let k = (m + 3.0) * (1.0 + gamma) - 3.0;
    (delta, k)
}

/// Exponent of H_m in t0, with the numerator written as 3(k+3) − (m+3)(1−γ).
pub fn t0_exponent(gamma: f64, delta: f64, m: f64) -> f64 {
    let (_, k) = delta_k_of(gamma, m);
    (3.0 * (k + 3.0) - (m + 3.0) * (1.0 - gamma)) / ((1.0 + gamma + delta) * (m + 3.0).powi(2))
}

pub fn t0_of(h_m: f64, gamma: f64, delta: f64, m: f64) -> Result<f64> {
    if !(h_m >= 1.0) {
        return Err(Error::param("H_m", format!("H_m = {h_m} but H_m >= 1 is required")));
    }
    let t0 = h_m.powf(-t0_exponent(gamma, delta, m));
    debug_assert!(t0 <= 1.0);
    Ok(t0)
}

pub fn e_of(m: f64, gamma: f64) -> f64 {
    let (delta, _) = delta_k_of(gamma, m);
    (2.0 + 4.0 * gamma) / ((1.0 + delta + gamma) * (m + 3.0)) - 1.0 / (m - 2.0)
}

fn in_c0_domain(m: f64) -> Result<()> {
    if m > M_LOW && m < M_HIGH {
        Ok(())
    } else {
        Err(Error::param("m", format!("m = {m} is outside (16/3, 7)")))
    }
}

/// Root of γ ↦ e(m, γ) on (0, ∞). e is increasing in γ, negative at 0 for
/// m < 7 and positive for large γ when m > 11/3.
pub fn gamma_e_root(m: f64) -> Result<f64> {
    in_c0_domain(m)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    while e_of(m, hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::EmptyInterval(format!("e(m, gamma) stays negative for m = {m}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if e_of(m, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(lo)
}

/// A γ inside `gamma_admissible(m, m0)` with e(m, γ) < 0: half of the
/// smaller of the admissible bound and the bisected root of e.
pub fn gamma_with_negative_e(m: f64, m0: f64) -> Result<f64> {
    let interval = gamma_admissible(m, m0)?;
    let root = gamma_e_root(m)?;
    let gamma = 0.5 * interval.hi.min(root);
    debug_assert!(interval.contains(gamma) && e_of(m, gamma) < 0.0);
    Ok(gamma)
}

/// The quantity minimized by c0: max{(m+3)/γ, (5/2)/(−e(m, γ))}.
pub fn c0_objective(m: f64, gamma: f64) -> f64 {
    let bracket = -e_of(m, gamma);
    if gamma <= 0.0 || bracket <= 0.0 {
        return f64::INFINITY;
    }
    ((m + 3.0) / gamma).max(2.5 / bracket)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum C0Method {
    /// Dense γ grid with step 1e-4 followed by golden-section refinement
    /// inside the best grid cell.
    Grid,
    /// Golden-section search on the whole admissible range.
    Golden,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0 {
    pub value: f64,
    pub gamma: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// c0(m) = 3.1 · min over γ of [`c0_objective`], with γ ranging over
/// (0, min(1, γ_e)) where the bracket is positive.
pub fn c0_with(m: f64, method: C0Method) -> Result<C0> {
    in_c0_domain(m)?;
    let upper = gamma_e_root(m)?.min(1.0);
    if !(upper > 0.0) {
        return Err(Error::EmptyInterval(format!("no gamma with positive bracket for m = {m}")));
    }
    let f = |g: f64| c0_objective(m, g);
    let gamma = match method {
        C0Method::Grid => {
            let step = 1e-4;
            let n = (upper / step).floor() as usize;
            let (mut best_g, mut best_v) = (f64::NAN, f64::INFINITY);
            for i in 1..=n {
                let g = i as f64 * step;
                let v = f(g);
                if v < best_v {
                    best_v = v;
                    best_g = g;
                }
            }
            if !best_v.is_finite() {
                // range narrower than one grid step
                golden_section(f, 0.0, upper, 1e-14)
            } else {
                let lo = (best_g - step).max(0.0);
                let hi = (best_g + step).min(upper);
                golden_section(f, lo, hi, 1e-14)
            }
        }
        C0Method::Golden => golden_section(f, 0.0, upper, 1e-14),
    };
    let value = 3.1 * f(gamma);
    if !value.is_finite() {
        return Err(Error::EmptyInterval(format!("no admissible gamma for c0 at m = {m}")));
    }
    Ok(C0 { value, gamma })
}

pub fn c0_of(m: f64) -> Result<f64> {
    c0_with(m, C0Method::Grid).map(|c| c.value)
}

/// Inputs for a [`ConstantsTable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableInputs {
    pub m: f64,
    pub m0: f64,
    pub t_final: f64,
    pub k0: f64,
    pub f0_l1: f64,
    pub lambda: f64,
    /// H_m used for t0; 1 gives t0 = 1.
    pub h_m: f64,
}

/// γ is the c0 minimizer when it is admissible, otherwise the value from
/// [`gamma_with_negative_e`]; outside (16/3, 7) it is half the admissible
/// upper bound.
pub fn build_table(inp: &TableInputs) -> Result<ConstantsTable> {
    if !(inp.lambda > 0.0 && inp.lambda <= 1.0) {
        return Err(Error::param("lambda", format!("lambda = {} must lie in (0, 1]", inp.lambda)));
    }
    let r_t = radius_r(inp.t_final, inp.f0_l1, inp.k0)?;
    let interval = gamma_admissible(inp.m, inp.m0)?;
    let (gamma, e_m, c0_m) = if inp.m > M_LOW && inp.m < M_HIGH {
        let c0 = c0_with(inp.m, C0Method::Grid)?;
        let gamma = if interval.contains(c0.gamma) && e_of(inp.m, c0.gamma) < 0.0 {
            c0.gamma
        } else {
            gamma_with_negative_e(inp.m, inp.m0)?
        };
        (gamma, Some(e_of(inp.m, gamma)), Some(c0.value))
    } else {
        (0.5 * interval.hi, None, None)
    };
    let (delta, k) = delta_k_of(gamma, inp.m);
    let t0 = t0_of(inp.h_m, gamma, delta, inp.m)?;
    Ok(ConstantsTable {
        m: inp.m,
        m0: inp.m0,
        t_final: inp.t_final,
        k0: inp.k0,
        f0_l1: inp.f0_l1,
        r_t,
        lambda: inp.lambda,
        gamma,
        delta,
        k,
        t0,
        h_m: inp.h_m,
        e_m,
        c0_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_examples() {
        let r = radius_r(0.0, 0.0, 100.0).unwrap();
        assert!((r - 2400f64.cbrt()).abs() < 1e-12);
        assert!((r - 13.3887).abs() < 1e-4);
        let r1 = radius_r(1.0, 0.0, 100.0).unwrap();
        assert!((r1 - 2.0 * r).abs() < 1e-12);
        assert!(radius_r(0.0, 0.0, 99.0).is_err());
    }

    #[test]
    fn radius_cube_identity() {
        for &(t, l1, k0) in &[(0.3, 0.5, 100.0), (5.0, 2.0, 150.0), (10.0, 0.0, 1e4)] {
            let r = radius_r(t, l1, k0).unwrap();
            let lhs = r.powi(3);
            let rhs = 24.0 * k0 * (1.0 + l1) * (1.0 + t).powi(3);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn gamma_interval_examples() {
        let g = gamma_admissible(5.0, 7.0).unwrap();
        assert_eq!(g.hi, 0.25);
        assert!(!g.hi_closed);
        let g = gamma_admissible(6.5, 7.0).unwrap();
        assert!((g.hi - 0.5 / 9.5).abs() < 1e-15);
        let g = gamma_admissible(3.0001, 7.0).unwrap();
        assert!((g.hi - 0.0001 / 2.9999).abs() < 1e-12);
        assert!(g.hi_closed);
        assert!(gamma_admissible(7.0, 7.0).is_err());
    }

    #[test]
    fn delta_k_examples() {
        let (d, k) = delta_k_of(0.5, 3.0);
        assert!((d - 0.05).abs() < 1e-15);
        assert!((k - 6.0).abs() < 1e-15);
        let (d, k) = delta_k_of(1e-12, 4.5);
        assert!(d < 1e-12 && (k - 4.5).abs() < 1e-10);
    }

    #[test]
    fn t0_examples() {
        let (d, _) = delta_k_of(0.5, 6.0);
        assert_eq!(t0_of(1.0, 0.5, d, 6.0).unwrap(), 1.0);
        assert!(t0_of(0.5, 0.5, d, 6.0).is_err());
        // independent arithmetic: numerator (m+3)(2+4γ) = 36, denominator
        // (1+γ+δ)·81 with δ = 0.5/14.5
        let delta = 0.5 / 14.5;
        let expo = 36.0 / ((1.5 + delta) * 81.0);
        let t0 = t0_of(10.0, 0.5, delta, 6.0).unwrap();
        assert!((t0 - 10f64.powf(-expo)).abs() < 1e-14);
        assert!(t0 < 1.0);
    }

    #[test]
    fn t0_numerator_simplifies() {
        for &(g, m) in &[(0.1, 5.5), (0.7, 6.2), (0.33, 4.0)] {
            let (d, _) = delta_k_of(g, m);
            let lhs = t0_exponent(g, d, m) * (1.0 + g + d) * (m + 3.0) * (m + 3.0);
            assert!((lhs - (m + 3.0) * (2.0 + 4.0 * g)).abs() < 1e-12);
        }
    }

    #[test]
    fn e_limits() {
        assert!((e_of(7.0, 1e-14)).abs() < 1e-12);
        for m in [5.5, 6.0, 6.9] {
            let lim = 2.0 / (m + 3.0) - 1.0 / (m - 2.0);
            assert!((e_of(m, 1e-13) - lim).abs() < 1e-11);
            assert!(lim < 0.0);
        }
    }

    #[test]
    fn c0_methods_agree() {
        for m in [5.5, 6.0, 6.5, 6.9] {
            let a = c0_with(m, C0Method::Grid).unwrap();
            let b = c0_with(m, C0Method::Golden).unwrap();
            assert!((a.value - b.value).abs() <= 0.01 * a.value, "m={m}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn table_invariants() {
        let t =
            build_table(&TableInputs { m: 6.0, m0: 7.0, t_final: 10.0, k0: 100.0, f0_l1: 0.5, lambda: 1.0, h_m: 1.0 })
                .unwrap();
        assert!((t.k + 3.0 - (t.m + 3.0) * (1.0 + t.gamma)).abs() < 1e-12);
        assert!((t.delta - t.gamma / (1.0 + (t.m + 3.0) * (t.gamma + 1.0))).abs() < 1e-15);
        assert!(t.c0_m.is_some() && t.e_m.unwrap() < 0.0);
        assert!(t.gamma > 0.0 && t.gamma < 1.0);
    }
}
