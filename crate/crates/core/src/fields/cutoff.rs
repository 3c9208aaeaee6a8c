use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial_data::smootherstep;
use crate::model::{Mat3, ParticleEnsemble, Vec3};

/// χ0(s) = 1 − smootherstep(s − 1): 1 on s ≤ 1, 0 on s ≥ 2, C² in between.
/// Sup of |χ0'| is 15/8 and of |χ0''| is 10/√3.
pub fn chi0(s: f64) -> f64 {
    1.0 - smootherstep(s - 1.0)
}

pub fn chi0_d1(s: f64) -> f64 {
    let u = s - 1.0;
    if (0.0..=1.0).contains(&u) {
        -30.0 * u * u * (1.0 - u) * (1.0 - u)
    } else {
        0.0
    }
}

pub fn chi0_d2(s: f64) -> f64 {
    let u = s - 1.0;
    if (0.0..=1.0).contains(&u) {
        -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    #[serde(rename = "R")]
    pub r: f64,
}

impl CutoffSpec {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r.is_finite() {
            Ok(CutoffSpec { r })
        } else {
            Err(Error::param("R", format!("cutoff radius {r} must be positive")))
        }
    }

    /// χ_R(z) = χ0(|z|/R).
    pub fn chi(&self, z: &Vec3) -> f64 {
        chi0(z.norm() / self.r)
    }

    pub fn grad(&self, z: &Vec3) -> Vec3 {
        let r = z.norm();
        if r == 0.0 {
            return Vec3::zeros();
        }
        z * (chi0_d1(r / self.r) / (self.r * r))
    }

    pub fn hessian(&self, z: &Vec3) -> Mat3 {
        let r = z.norm();
        if r == 0.0 {
            return Mat3::zeros();
        }
        let n = z / r;
        let nn = n * n.transpose();
        nn * (chi0_d2(r / self.r) / (self.r * self.r)) + (Mat3::identity() - nn) * (chi0_d1(r / self.r) / (self.r * r))
    }

    /// Sup of |∇χ0| and of the spectral norm of ∇∇χ0 over `samples` radii
    /// in (0, 3].
    pub fn sampled_bounds(samples: usize) -> (f64, f64) {
        let mut g: f64 = 0.0;
        let mut h: f64 = 0.0;
        for i in 1..=samples {
            let s = 3.0 * i as f64 / samples as f64;
            g = g.max(chi0_d1(s).abs());
            h = h.max(chi0_d2(s).abs()).max((chi0_d1(s) / s).abs());
        }
        (g, h)
    }
}

/// Splits `value` observed at x into χ_R(x − center)·value and the rest.
pub fn cutoff_split(x: &Vec3, center: &Vec3, spec: &CutoffSpec, value: &Vec3) -> (Vec3, Vec3) {
    let internal = value * spec.chi(&(x - center));
    (internal, value - internal)
}

/// (1 − χ_R(z)) z/|z|³ and its Jacobian.
pub fn ext_kernel(z: &Vec3, spec: &CutoffSpec) -> (Vec3, Mat3) {
    let r2 = z.norm_squared();
    if r2 <= spec.r * spec.r {
        return (Vec3::zeros(), Mat3::zeros());
    }
    let r = r2.sqrt();
    let inv3 = 1.0 / (r2 * r);
    let k = z * inv3;
    let dk = Mat3::identity() * inv3 - (z * z.transpose()) * (3.0 * inv3 / r2);
    let outer = 1.0 - chi0(r / spec.r);
    let g = spec.grad(z);
    (k * outer, dk * outer - k * g.transpose())
}

/// Sources of E_ext + F_ext at one instant: plasma particles and the charge.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtSource {
    pub positions: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub xi: Vec3,
    pub cutoff: CutoffSpec,
}

impl ExtSource {
    pub fn new(ens: &ParticleEnsemble, xi: Vec3, cutoff: CutoffSpec) -> Self {
        ExtSource { positions: ens.positions.clone(), weights: ens.weights.clone(), xi, cutoff }
    }
}

/// (E_ext + F_ext)(x) and its Jacobian.
pub fn ext_field_at(src: &ExtSource, x: &Vec3) -> (Vec3, Mat3) {
    let (mut e, mut de) = ext_kernel(&(x - src.xi), &src.cutoff);
    let r2 = src.cutoff.r * src.cutoff.r;
    for (p, w) in src.positions.iter().zip(&src.weights) {
        let z = x - p;
        if z.norm_squared() <= r2 {
            continue;
        }
        let (k, dk) = ext_kernel(&z, &src.cutoff);
        e += k * *w;
        de += dk * *w;
    }
    (e, de)
}

/// Pairwise field split by the per-pair mask χ_R(x_i − x_j): returns
/// (internal, external) per particle.
pub fn pairwise_field_split(
    ens: &ParticleEnsemble,
    softening: f64,
    spec: &CutoffSpec,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let eps2 = softening * softening;
    let n = ens.len();
    let mut int = vec![Vec3::zeros(); n];
    let mut ext = vec![Vec3::zeros(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let z = ens.positions[i] - ens.positions[j];
            let r2 = z.norm_squared() + eps2;
            if r2 == 0.0 {
                return Err(Error::Singular { what: format!("particles {i} and {j} coincide") });
            }
            let c = z * (ens.weights[j] / (r2 * r2.sqrt()));
            let ci = c * spec.chi(&z);
            int[i] += ci;
            ext[i] += c - ci;
        }
    }
    Ok((int, ext))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtBoundsReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub f0_l1: f64,
    pub samples: usize,
    /// max over points and components of |E_ext + F_ext| / ((1+‖f0‖₁)/R²)
    pub value_ratio: f64,
    /// same for first derivatives against 6(1+‖f0‖₁)/R³
    pub d1_ratio: f64,
    /// same for second derivatives against 60(1+‖f0‖₁)/R⁴
    pub d2_ratio: f64,
    /// finite-difference steps, as multiples of R
    pub step_d1: f64,
    pub step_d2: f64,
    pub pass: bool,
}

impl ExtBoundsReport {
    pub fn worst_ratio(&self) -> f64 {
        self.value_ratio.max(self.d1_ratio).max(self.d2_ratio)
    }
}

const FD1: f64 = 1e-4;
const FD2: f64 = 1e-3;

/// Componentwise ext-field bounds at explicit points. Derivatives are
/// central differences of the field with steps 1e-4·R (first) and 1e-3·R
/// (second, 4-point mixed stencil).
pub fn ext_bounds_at(src: &ExtSource, f0_l1: f64, points: &[Vec3]) -> ExtBoundsReport {
    let r = src.cutoff.r;
    let b0 = (1.0 + f0_l1) / (r * r);
    let b1 = 6.0 * (1.0 + f0_l1) / r.powi(3);
    let b2 = 60.0 * (1.0 + f0_l1) / r.powi(4);
    let field = |x: &Vec3| ext_field_at(src, x).0;
    let (h1, h2) = (FD1 * r, FD2 * r);
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let (mut v0, mut v1, mut v2): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for x in points {
        let e = field(x);
        v0 = v0.max(e.amax() / b0);
        for a in 0..3 {
            let d = (field(&(x + axes[a] * h1)) - field(&(x - axes[a] * h1))) / (2.0 * h1);
            v1 = v1.max(d.amax() / b1);
            for b in a..3 {
                let d2 = if a == b {
                    (field(&(x + axes[a] * h2)) - e * 2.0 + field(&(x - axes[a] * h2))) / (h2 * h2)
                } else {
                    let (ea, eb) = (axes[a] * h2, axes[b] * h2);
                    (field(&(x + ea + eb)) - field(&(x + ea - eb)) - field(&(x - ea + eb)) + field(&(x - ea - eb)))
                        / (4.0 * h2 * h2)
                };
                v2 = v2.max(d2.amax() / b2);
            }
        }
    }
    let tol = 1.0 + 1e-3;
    ExtBoundsReport {
        r,
        f0_l1,
        samples: points.len(),
        value_ratio: v0,
        d1_ratio: v1,
        d2_ratio: v2,
        step_d1: FD1,
        step_d2: FD2,
        pass: v0 <= tol && v1 <= tol && v2 <= tol,
    }
}

/// [`ext_bounds_at`] on `samples` points drawn uniformly from the ball
/// around ξ that reaches 3R beyond the farthest particle.
pub fn ext_bounds_check(src: &ExtSource, f0_l1: f64, samples: usize, seed: u64) -> ExtBoundsReport {
    let reach = src.positions.iter().map(|p| (p - src.xi).norm()).fold(0.0, f64::max) + 3.0 * src.cutoff.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm_squared() <= 1.0 {
            points.push(src.xi + p * reach);
        }
    }
    ext_bounds_at(src, f0_l1, &points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi0_bounds_hold() {
        let (g, h) = CutoffSpec::sampled_bounds(200_000);
        assert!(g <= 2.0 && (g - 1.875).abs() < 1e-6);
        assert!(h <= 20.0 && (h - 10.0 / 3f64.sqrt()).abs() < 1e-3);
        assert_eq!(chi0(0.5), 1.0);
        assert_eq!(chi0(1.0), 1.0);
        assert_eq!(chi0(2.0), 0.0);
        assert_eq!(chi0(7.0), 0.0);
    }

    #[test]
    fn kernel_jacobian_matches_differences() {
        let spec = CutoffSpec::new(1.3).unwrap();
        let z = Vec3::new(1.5, 0.8, -0.4);
        let (_, j) = ext_kernel(&z, &spec);
        let h = 1e-6;
        for a in 0..3 {
            let mut dz = Vec3::zeros();
            dz[a] = h;
            let d = (ext_kernel(&(z + dz), &spec).0 - ext_kernel(&(z - dz), &spec).0) / (2.0 * h);
            for i in 0..3 {
                assert!((d[i] - j[(i, a)]).abs() < 1e-7, "{a} {i}: {} vs {}", d[i], j[(i, a)]);
            }
        }
    }

    #[test]
    fn hessian_matches_differences() {
        let spec = CutoffSpec::new(0.7).unwrap();
        let z = Vec3::new(0.9, 0.3, 0.2);
        let hs = spec.hessian(&z);
        let h = 1e-6;
        for a in 0..3 {
            let mut dz = Vec3::zeros();
            dz[a] = h;
            let d = (spec.grad(&(z + dz)) - spec.grad(&(z - dz))) / (2.0 * h);
            for i in 0..3 {
                assert!((d[i] - hs[(i, a)]).abs() < 1e-6);
            }
        }
    }
}
