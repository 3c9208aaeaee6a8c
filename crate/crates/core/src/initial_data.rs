//! Analytic initial densities, their moments by quadrature, and sampling.
//!
//! A profile is a product f0(x, v) = A · S(x) · P(r) · H(r) · G(v) with
//! r = |x − ξ0|:
//!
//! * S: `exp(−|x−c|²/2σ²)` for the Maxwellian and power kinds, the indicator
//!   of |x−c| ≤ σ for `uniform_balls` (σ = `spatial_radius`);
//! * P: `(r²/(r²+σ²))^{β/2}` for `power_vicinity`, 1 otherwise;
//! * H: 0 for r < ε, `smootherstep((r−ε)/ε)` on [ε, 2ε], 1 beyond, or 1
//!   everywhere when ε = 0;
//! * G: `exp(−|v|²/2θ)` with θ = `velocity_temperature`, or for
//!   `uniform_balls` the indicator of |v| ≤ θ.
//!
//! Near the charge the integrand of the order-m moment behaves like
//! r^{β+2−m/2}, so a profile without hole has finite moments exactly for
//! m < m0 = 6 + 2β (β = 0 for kinds without P, when S(ξ0) > 0). With a hole
//! every order is finite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParticleEnsemble, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    MaxwellianBump,
    PowerVicinity,
    UniformBalls,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub kind: ProfileKind,
    pub spatial_center: Vec3,
    pub spatial_radius: f64,
    pub velocity_temperature: f64,
    pub vicinity_exponent: f64,
    pub amplitude: f64,
    pub epsilon_hole: f64,
    /// Initial charge position; the hole and P are centred here.
    pub xi0: Vec3,
}

/// 6u⁵ − 15u⁴ + 10u³ clamped to [0, 1].
pub fn smootherstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (u * 6.0 - 15.0) + 10.0)
}

impl DensityProfile {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} must be positive")))
            }
        };
        pos("spatial_radius", self.spatial_radius)?;
        pos("velocity_temperature", self.velocity_temperature)?;
        if !(self.amplitude >= 0.0) {
            return Err(Error::param("amplitude", format!("{} must be nonnegative", self.amplitude)));
        }
        if !(self.epsilon_hole >= 0.0) {
            return Err(Error::param("epsilon_hole", format!("{} must be nonnegative", self.epsilon_hole)));
        }
        if !(self.vicinity_exponent >= 0.0) {
            return Err(Error::param("vicinity_exponent", format!("{} must be nonnegative", self.vicinity_exponent)));
        }
        Ok(())
    }

    pub fn hole(&self, r: f64) -> f64 {
        let eps = self.epsilon_hole;
        if eps == 0.0 {
            1.0
        } else if r < eps {
            0.0
        } else {
            smootherstep((r - eps) / eps)
        }
    }

    pub fn vicinity(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::PowerVicinity => {
                let a2 = self.spatial_radius * self.spatial_radius;
                (r * r / (r * r + a2)).powf(0.5 * self.vicinity_exponent)
            }
            _ => 1.0,
        }
    }

    fn envelope(&self, x: &Vec3) -> f64 {
        let d2 = (x - self.spatial_center).norm_squared();
        match self.kind {
            ProfileKind::UniformBalls => {
                if d2 <= self.spatial_radius * self.spatial_radius {
                    1.0
                } else {
                    0.0
                }
            }
            _ => (-0.5 * d2 / (self.spatial_radius * self.spatial_radius)).exp(),
        }
    }

    fn velocity_factor(&self, u: f64) -> f64 {
        match self.kind {
            ProfileKind::UniformBalls => {
                if u <= self.velocity_temperature {
                    1.0
                } else {
                    0.0
                }
            }
            _ => (-0.5 * u * u / self.velocity_temperature).exp(),
        }
    }

    /// Largest value f0 can take; an upper bound for ‖f0‖∞.
    pub fn linf_bound(&self) -> f64 {
        self.amplitude
    }

    /// Supremum of the orders m with a finite moment about ξ0.
    pub fn admissible_m0(&self) -> f64 {
        if self.epsilon_hole > 0.0 {
            return f64::INFINITY;
        }
        let touches = self.envelope(&self.xi0) > 0.0;
        match (self.kind, touches) {
            (_, false) => f64::INFINITY,
            (ProfileKind::PowerVicinity, true) => 6.0 + 2.0 * self.vicinity_exponent,
            (_, true) => 6.0,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        DensityProfile { amplitude, ..self.clone() }
    }

    /// Surface integral of S^power over the sphere of radius r around ξ0.
    fn angular(&self, r: f64, power: f64) -> f64 {
        use std::f64::consts::PI;
        let d = (self.spatial_center - self.xi0).norm();
        let sigma = self.spatial_radius;
        match self.kind {
            ProfileKind::UniformBalls => {
                if r + d <= sigma {
                    4.0 * PI
                } else if r >= d + sigma || r <= d - sigma {
                    0.0
                } else {
                    let mu0 = (r * r + d * d - sigma * sigma) / (2.0 * r * d);
                    2.0 * PI * (1.0 - mu0)
                }
            }
            _ => {
                let s2 = sigma * sigma / power;
                let z = r * d / s2;
                if z < 1e-6 {
                    4.0 * PI * (-0.5 * (r * r + d * d) / s2).exp() * (1.0 + z * z / 6.0)
                } else {
                    2.0 * PI * s2 / (r * d)
                        * ((-0.5 * (r - d) * (r - d) / s2).exp() - (-0.5 * (r + d) * (r + d) / s2).exp())
                }
            }
        }
    }

    /// Radial support [lo, hi] of the shell integral around ξ0.
    fn radial_range(&self) -> (f64, f64) {
        let d = (self.spatial_center - self.xi0).norm();
        match self.kind {
            ProfileKind::UniformBalls => {
                ((d - self.spatial_radius).max(0.0).max(self.epsilon_hole), d + self.spatial_radius)
            }
            _ => (self.epsilon_hole, d + 10.0 * self.spatial_radius),
        }
    }

    fn speed_max(&self) -> f64 {
        match self.kind {
            ProfileKind::UniformBalls => self.velocity_temperature,
            _ => 10.0 * self.velocity_temperature.sqrt(),
        }
    }

    /// Midpoint rule over n shells of ∫ S^power(x) g(r) dx.
    fn shell_integral(&self, power: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = self.radial_range();
        if hi <= lo {
            return 0.0;
        }
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let r = lo + (i as f64 + 0.5) * h;
                r * r * self.angular(r, power) * g(r)
            })
            .sum::<f64>()
            * h
    }

    /// Midpoint rule over n points of ∫ q(|v|) G(v) dv.
    fn speed_integral(&self, n: usize, q: impl Fn(f64) -> f64) -> f64 {
        let umax = self.speed_max();
        let h = umax / n as f64;
        (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                4.0 * std::f64::consts::PI * u * u * self.velocity_factor(u) * q(u)
            })
            .sum::<f64>()
            * h
    }

    /// ∫ G(v) dv in closed form.
    pub fn velocity_mass(&self) -> f64 {
        use std::f64::consts::PI;
        match self.kind {
            ProfileKind::UniformBalls => 4.0 / 3.0 * PI * self.velocity_temperature.powi(3),
            _ => (2.0 * PI * self.velocity_temperature).powf(1.5),
        }
    }
}

/// f0(x, v); exactly 0 inside the hole.
pub fn evaluate(profile: &DensityProfile, x: &Vec3, v: &Vec3) -> f64 {
    let r = (x - profile.xi0).norm();
    let hole = profile.hole(r);
    if hole == 0.0 {
        return 0.0;
    }
    profile.amplitude * profile.envelope(x) * profile.vicinity(r) * hole * profile.velocity_factor(v.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Shells at the coarsest level.
    pub n_r: usize,
    /// Speed nodes at the coarsest level.
    pub n_u: usize,
    /// Number of levels; each doubles both counts.
    pub levels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { n_r: 256, n_u: 96, levels: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub m: f64,
    pub value: f64,
    /// |Q_L − Q_{L−1}| between the two finest levels.
    pub error_estimate: f64,
}

fn moment_at(profile: &DensityProfile, m: f64, n_r: usize, n_u: usize) -> f64 {
    let a = profile.amplitude;
    if m == 0.0 {
        let vm = profile.velocity_mass();
        return a * vm * profile.shell_integral(1.0, n_r, |r| profile.vicinity(r) * profile.hole(r));
    }
    profile.shell_integral(1.0, n_r, |r| {
        let w = profile.vicinity(r) * profile.hole(r);
        if w == 0.0 {
            return 0.0;
        }
        let inv_r = 1.0 / r;
        a * w * profile.speed_integral(n_u, |u| (u * u + inv_r).powf(0.5 * m))
    })
}

/// Quadrature values of ∬ (|v|² + 1/|x − ξ0|)^{m/2} f0 at every refinement
/// level, coarse to fine, with no divergence screening.
pub fn moment_refinement(profile: &DensityProfile, m: f64, spec: &QuadratureSpec) -> Vec<f64> {
    (0..spec.levels.max(1)).map(|l| moment_at(profile, m, spec.n_r << l, spec.n_u << l)).collect()
}

/// ∬ (|v|² + 1/|x − ξ0|)^{m/2} f0 dx dv about the profile's ξ0, which must
/// equal `xi0`.
pub fn initial_moment(profile: &DensityProfile, m: f64, xi0: &Vec3) -> Result<MomentValue> {
    initial_moment_with(profile, m, xi0, &QuadratureSpec::default())
}

pub fn initial_moment_with(profile: &DensityProfile, m: f64, xi0: &Vec3, spec: &QuadratureSpec) -> Result<MomentValue> {
    profile.validate()?;
    if (profile.xi0 - xi0).norm() > 0.0 {
        return Err(Error::param("xi0", "moments are taken about the profile's own charge position"));
    }
    if !(m >= 0.0) {
        return Err(Error::param("m", format!("order {m} must be nonnegative")));
    }
    let m0 = profile.admissible_m0();
    if m >= m0 {
        return Err(Error::Divergent {
            m,
            reason: format!(
                "the moment hypothesis needs m < m0 = {m0} for this profile; \
                 the integrand behaves like r^(beta + 2 - m/2) at the charge"
            ),
        });
    }
    let seq = moment_refinement(profile, m, spec);
    let value = *seq.last().unwrap();
    if !value.is_finite() {
        return Err(Error::Divergent { m, reason: "quadrature produced a non-finite value".into() });
    }
    let n = seq.len();
    let error_estimate = if n >= 2 { (seq[n - 1] - seq[n - 2]).abs() } else { f64::NAN };
    if n >= 3 {
        let d1 = seq[n - 2] - seq[n - 3];
        let d2 = seq[n - 1] - seq[n - 2];
        if d1 > 0.0 && d2 >= 0.95 * d1 && d2 > 0.05 * value.abs() {
            return Err(Error::Divergent { m, reason: format!("value keeps growing under refinement: {seq:?}") });
        }
    }
    Ok(MomentValue { m, value, error_estimate })
}

/// ‖f0‖₁ by quadrature.
pub fn total_mass(profile: &DensityProfile) -> Result<f64> {
    initial_moment(profile, 0.0, &profile.xi0).map(|m| m.value)
}

/// ∬ |v|^b f0 dx dv by quadrature.
pub fn velocity_moment_integral(profile: &DensityProfile, b: f64) -> f64 {
    let spec = QuadratureSpec::default();
    let n_r = spec.n_r << (spec.levels - 1);
    let n_u = spec.n_u << (spec.levels - 1);
    let spatial = profile.shell_integral(1.0, n_r, |r| profile.vicinity(r) * profile.hole(r));
    profile.amplitude * spatial * profile.speed_integral(n_u, |u| u.powf(b))
}

/// ‖ρ0‖_p with ρ0 = ∫ f0 dv, by quadrature.
pub fn rho_lp_norm(profile: &DensityProfile, p: f64) -> f64 {
    let spec = QuadratureSpec::default();
    let n_r = spec.n_r << (spec.levels - 1);
    let scale = profile.amplitude * profile.velocity_mass();
    let integral = profile.shell_integral(p, n_r, |r| (profile.vicinity(r) * profile.hole(r)).powf(p));
    scale * integral.powf(1.0 / p)
}

/// Copy of `profile` rescaled so that its quadrature mass equals `mass`.
pub fn with_total_mass(profile: &DensityProfile, mass: f64) -> Result<DensityProfile> {
    let unit = total_mass(&profile.with_amplitude(1.0))?;
    if !(unit > 0.0) {
        return Err(Error::param("profile", "profile has zero mass"));
    }
    Ok(profile.with_amplitude(mass / unit))
}

/// Draws N particles with equal weights summing to the quadrature mass.
/// Positions come from the envelope S and are accepted with probability
/// P(r)·H(r); velocities are drawn exactly from G.
pub fn sample(profile: &DensityProfile, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    profile.validate()?;
    if n == 0 {
        return Err(Error::param("N", "at least one particle is required"));
    }
    let mass = total_mass(profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while positions.len() < n {
        attempts += 1;
        let x = draw_position(profile, &mut rng);
        let r = (x - profile.xi0).norm();
        let accept = profile.vicinity(r) * profile.hole(r);
        let u: f64 = rng.random();
        if u < accept {
            positions.push(x);
            velocities.push(draw_velocity(profile, &mut rng));
        }
        if attempts >= 100_000 && (positions.len() as f64) < 1e-4 * attempts as f64 {
            return Err(Error::Acceptance { rate: positions.len() as f64 / attempts as f64 });
        }
    }
    let w = mass / n as f64;
    ParticleEnsemble::new(positions, velocities, vec![w; n])
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn uniform_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm_squared() <= 1.0 {
            return p * radius;
        }
    }
}

fn draw_position(profile: &DensityProfile, rng: &mut ChaCha8Rng) -> Vec3 {
    match profile.kind {
        ProfileKind::UniformBalls => profile.spatial_center + uniform_ball(rng, profile.spatial_radius),
        _ => profile.spatial_center + normal3(rng) * profile.spatial_radius,
    }
}

fn draw_velocity(profile: &DensityProfile, rng: &mut ChaCha8Rng) -> Vec3 {
    match profile.kind {
        ProfileKind::UniformBalls => uniform_ball(rng, profile.velocity_temperature),
        _ => normal3(rng) * profile.velocity_temperature.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> DensityProfile {
        DensityProfile {
            kind: ProfileKind::MaxwellianBump,
            spatial_center: Vec3::new(0.5, 0.0, 0.0),
            spatial_radius: 1.0,
            velocity_temperature: 0.5,
            vicinity_exponent: 0.0,
            amplitude: 0.1,
            epsilon_hole: 0.2,
            xi0: Vec3::zeros(),
        }
    }

    #[test]
    fn smootherstep_endpoints() {
        assert_eq!(smootherstep(0.0), 0.0);
        assert_eq!(smootherstep(1.0), 1.0);
        assert_eq!(smootherstep(0.5), 0.5);
    }

    #[test]
    fn hole_is_exact_zero() {
        let p = bump();
        assert_eq!(evaluate(&p, &Vec3::new(0.1, 0.05, 0.0), &Vec3::zeros()), 0.0);
    }

    #[test]
    fn peak_equals_amplitude() {
        let p = bump();
        assert_eq!(evaluate(&p, &p.spatial_center, &Vec3::zeros()), p.amplitude);
    }

    #[test]
    fn m0_formula() {
        let mut p = bump();
        assert!(p.admissible_m0().is_infinite());
        p.epsilon_hole = 0.0;
        assert_eq!(p.admissible_m0(), 6.0);
        p.kind = ProfileKind::PowerVicinity;
        p.vicinity_exponent = 1.5;
        assert_eq!(p.admissible_m0(), 9.0);
    }

    #[test]
    fn angular_gaussian_matches_direct_quadrature() {
        // direct 2D quadrature over the sphere against the closed form
        let p = bump();
        for &r in &[0.05, 0.7, 2.3] {
            let n = 400;
            let mut s = 0.0;
            for i in 0..n {
                let mu = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                let x = Vec3::new(r * mu, r * (1.0 - mu * mu).sqrt(), 0.0);
                s += p.envelope(&x) * 2.0 / n as f64;
            }
            let direct = 2.0 * std::f64::consts::PI * s;
            assert!((direct - p.angular(r, 1.0)).abs() < 1e-5 * direct);
        }
    }

    #[test]
    fn uniform_ball_mass_closed_form() {
        use std::f64::consts::PI;
        let p = DensityProfile {
            kind: ProfileKind::UniformBalls,
            spatial_center: Vec3::new(0.3, 0.0, 0.0),
            spatial_radius: 1.0,
            velocity_temperature: 2.0,
            vicinity_exponent: 0.0,
            amplitude: 1.0,
            epsilon_hole: 0.0,
            xi0: Vec3::zeros(),
        };
        let mass = total_mass(&p).unwrap();
        let exact = 4.0 / 3.0 * PI * (4.0 / 3.0 * PI * 8.0);
        assert!((mass - exact).abs() < 1e-4 * exact, "{mass} vs {exact}");
    }
}
