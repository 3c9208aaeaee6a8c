use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, GridSpec};
use crate::initial_data::{self, DensityProfile};
use crate::model::{estimate_f_linf, GridField, LinfEstimate, ParticleEnsemble};

/// Constant of ∫|v|^a f ≤ C ‖f‖∞^{(b−a)/(3+b)} (∫|v|^b f)^{(3+a)/(3+b)}.
///
/// Splitting at |v| = R gives ‖f‖∞ 4πR^{3+a}/(3+a) + R^{a−b} ∫|v|^b f;
/// the minimizing R^{3+b} = (b−a)B/(4π‖f‖∞) turns the sum into
/// ((3+b)/(3+a)) (4π/(b−a))^{(b−a)/(3+b)} ‖f‖∞^{…} B^{…}.
pub fn interp_constant(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::param("b", format!("need b > a >= 0, got a = {a}, b = {b}")));
    }
    let d = b - a;
    Ok((3.0 + b) / (3.0 + a) * (4.0 * PI / d).powf(d / (3.0 + b)))
}

/// A density in velocity alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityDensity {
    /// Radial, with value `values[k]` on edges[k] ≤ |v| < edges[k+1].
    Shells { edges: Vec<f64>, values: Vec<f64> },
    /// Constant on the cubes of an n³ lattice of side `spacing` centred at
    /// the origin; `values` in row-major (i, j, k) order.
    Cubes { spacing: f64, n: usize, values: Vec<f64> },
}

/// Midpoint subdivisions per axis inside each cube.
const CUBE_SUB: usize = 4;

impl VelocityDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            VelocityDensity::Shells { edges, values } => {
                if edges.len() != values.len() + 1 {
                    return Err(Error::param("edges", "need one more edge than values"));
                }
                if edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::param("edges", "edges must be nonnegative and increasing"));
                }
            }
            VelocityDensity::Cubes { spacing, n, values } => {
                if !(*spacing > 0.0) || values.len() != n * n * n {
                    return Err(Error::param("values", "need n³ values and a positive spacing"));
                }
            }
        }
        let vals = match self {
            VelocityDensity::Shells { values, .. } | VelocityDensity::Cubes { values, .. } => values,
        };
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("values", "density values must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn linf(&self) -> f64 {
        match self {
            VelocityDensity::Shells { values, .. } | VelocityDensity::Cubes { values, .. } => {
                values.iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// ∫ |v|^a f dv; exact for shells, midpoint on 4³ sub-cubes otherwise.
    pub fn moment(&self, a: f64) -> f64 {
        match self {
            VelocityDensity::Shells { edges, values } => values
                .iter()
                .enumerate()
                .map(|(k, f)| f * 4.0 * PI * (edges[k + 1].powf(3.0 + a) - edges[k].powf(3.0 + a)) / (3.0 + a))
                .sum(),
            VelocityDensity::Cubes { spacing, n, values } => {
                let h = *spacing;
                let sub = h / CUBE_SUB as f64;
                let lo = -0.5 * h * *n as f64;
                let mut total = 0.0;
                for i in 0..*n {
                    for j in 0..*n {
                        for k in 0..*n {
                            let f = values[(i * n + j) * n + k];
                            if f == 0.0 {
                                continue;
                            }
                            let mut acc = 0.0;
                            for p in 0..CUBE_SUB {
                                let x = lo + i as f64 * h + (p as f64 + 0.5) * sub;
                                for q in 0..CUBE_SUB {
                                    let y = lo + j as f64 * h + (q as f64 + 0.5) * sub;
                                    for r in 0..CUBE_SUB {
                                        let z = lo + k as f64 * h + (r as f64 + 0.5) * sub;
                                        acc += (x * x + y * y + z * z).powf(0.5 * a);
                                    }
                                }
                            }
                            total += f * acc * sub.powi(3);
                        }
                    }
                }
                total
            }
        }
    }

    /// The density v ↦ f(v/λ), i.e. the same shape dilated by λ.
    pub fn dilated(&self, lambda: f64) -> VelocityDensity {
        match self {
            VelocityDensity::Shells { edges, values } => {
                VelocityDensity::Shells { edges: edges.iter().map(|e| e * lambda).collect(), values: values.clone() }
            }
            VelocityDensity::Cubes { spacing, n, values } => {
                VelocityDensity::Cubes { spacing: spacing * lambda, n: *n, values: values.clone() }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpReport {
    pub a: f64,
    pub b: f64,
    pub constant: f64,
    pub linf: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs/rhs, 0 when both sides vanish.
    pub ratio: f64,
    pub pass: bool,
}

fn interp_report(a: f64, b: f64, linf: f64, lhs: f64, moment_b: f64) -> Result<InterpReport> {
    if !(linf.is_finite() && linf >= 0.0) {
        return Err(Error::Missing(format!("no usable ‖f‖∞ estimate (got {linf})")));
    }
    let constant = interp_constant(a, b)?;
    let rhs = constant * linf.powf((b - a) / (3.0 + b)) * moment_b.powf((3.0 + a) / (3.0 + b));
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(InterpReport { a, b, constant, linf, lhs, rhs, ratio, pass: ratio <= 1.0 })
}

/// ∫|v|^a f against C(a,b)‖f‖∞^{(b−a)/(3+b)}(∫|v|^b f)^{(3+a)/(3+b)}.
pub fn check_interpolation_moment(f: &VelocityDensity, a: f64, b: f64) -> Result<InterpReport> {
    interp_constant(a, b)?;
    f.validate()?;
    interp_report(a, b, f.linf(), f.moment(a), f.moment(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoInterpReport {
    pub b: f64,
    /// (b + 3)/3.
    pub p: f64,
    pub constant: f64,
    pub linf: f64,
    pub linf_bins: Option<(f64, f64)>,
    pub rho_norm: f64,
    pub velocity_moment: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

fn rho_report(b: f64, linf: f64, bins: Option<(f64, f64)>, rho_norm: f64, moment: f64) -> Result<RhoInterpReport> {
    let r = interp_report(0.0, b, linf, rho_norm, moment)?;
    Ok(RhoInterpReport {
        b,
        p: (b + 3.0) / 3.0,
        constant: r.constant,
        linf,
        linf_bins: bins,
        rho_norm,
        velocity_moment: moment,
        rhs: r.rhs,
        ratio: r.ratio,
        pass: r.pass,
    })
}

/// ‖ρ‖_{(b+3)/3} ≤ C(0,b) ‖f‖∞^{b/(3+b)} (∬|v|^b f)^{3/(3+b)} on an
/// ensemble: ρ by cloud-in-cell on `grid`, ‖f‖∞ from `linf` or else the
/// default histogram estimate. An ensemble of zero total weight passes
/// vacuously.
pub fn check_rho_interpolation(
    ens: &ParticleEnsemble,
    grid: &GridSpec,
    b: f64,
    linf: Option<LinfEstimate>,
) -> Result<RhoInterpReport> {
    interp_constant(0.0, b)?;
    if ens.is_empty() || ens.total_mass() == 0.0 {
        return rho_report(b, 0.0, None, 0.0, 0.0);
    }
    let est = match linf {
        Some(l) => l,
        None => estimate_f_linf(ens, None, None)?,
    };
    let (origin, h, dims) = fields::resolve_grid(grid, ens, &[])?;
    let rho = fields::deposit_cic(ens, &origin, h, dims)?;
    let g = GridField { origin, spacing: h, dims, rho, e: Vec::new() };
    let norm = fields::rho_lp_norm(&g, (b + 3.0) / 3.0);
    let moment: f64 = ens.velocities.iter().zip(&ens.weights).map(|(v, w)| w * v.norm().powf(b)).sum();
    rho_report(b, est.value, Some((est.bin_x, est.bin_v)), norm, moment)
}

/// The same inequality for an analytic profile, with ‖f0‖∞ from the
/// profile and both integrals by quadrature.
pub fn check_rho_interpolation_profile(profile: &DensityProfile, b: f64) -> Result<RhoInterpReport> {
    interp_constant(0.0, b)?;
    profile.validate()?;
    let norm = initial_data::rho_lp_norm(profile, (b + 3.0) / 3.0);
    let moment = initial_data::velocity_moment_integral(profile, b);
    rho_report(b, profile.linf_bound(), None, norm, moment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rejects_bad_exponents() {
        assert!(interp_constant(2.0, 2.0).is_err());
        assert!(interp_constant(-1.0, 2.0).is_err());
    }

    #[test]
    fn cubes_and_shells_agree_on_mass_scale() {
        let f = VelocityDensity::Cubes { spacing: 1.0, n: 1, values: vec![2.0] };
        assert!((f.moment(0.0) - 2.0).abs() < 1e-14);
        let s = VelocityDensity::Shells { edges: vec![0.0, 1.0], values: vec![3.0] };
        assert!((s.moment(0.0) - 4.0 * PI).abs() < 1e-12);
    }
}
