use crate::error::{Error, Result};
use crate::model::{ParticleEnsemble, Vec3};

/// Structure-of-arrays copy of positions and weights for the inner loops.
struct Soa {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
}

impl Soa {
    fn new(positions: &[Vec3], weights: &[f64]) -> Self {
        Soa {
            x: positions.iter().map(|p| p.x).collect(),
            y: positions.iter().map(|p| p.y).collect(),
            z: positions.iter().map(|p| p.z).collect(),
            w: weights.to_vec(),
        }
    }
}

const LANES: usize = 4;

/// Σ_j w_j (p − x_j)/(|p − x_j|² + ε²)^{3/2} over `range`, plus the
/// potential Σ_j w_j/(|p − x_j|² + ε²)^{1/2} when `POT`. The lane split fixes
/// the summation order, so results do not depend on threading.
#[inline(always)]
fn sum_range<const POT: bool>(s: &Soa, lo: usize, hi: usize, p: &Vec3, eps2: f64) -> [f64; 4] {
    let (xs, ys, zs, ws) = (&s.x[lo..hi], &s.y[lo..hi], &s.z[lo..hi], &s.w[lo..hi]);
    let mut ex = [0.0; LANES];
    let mut ey = [0.0; LANES];
    let mut ez = [0.0; LANES];
    let mut ph = [0.0; LANES];
    let n = xs.len();
    let body = n - n % LANES;
    let mut j = 0;
    while j < body {
        for l in 0..LANES {
            let dx = p.x - xs[j + l];
            let dy = p.y - ys[j + l];
            let dz = p.z - zs[j + l];
            let r2 = dx * dx + dy * dy + dz * dz + eps2;
            let inv = 1.0 / r2.sqrt();
            let wi = ws[j + l] * inv;
            let c = wi * inv * inv;
            ex[l] += dx * c;
            ey[l] += dy * c;
            ez[l] += dz * c;
            if POT {
                ph[l] += wi;
            }
        }
        j += LANES;
    }
    for jj in body..n {
        let dx = p.x - xs[jj];
        let dy = p.y - ys[jj];
        let dz = p.z - zs[jj];
        let r2 = dx * dx + dy * dy + dz * dz + eps2;
        let inv = 1.0 / r2.sqrt();
        let wi = ws[jj] * inv;
        let c = wi * inv * inv;
        ex[0] += dx * c;
        ey[0] += dy * c;
        ez[0] += dz * c;
        if POT {
            ph[0] += wi;
        }
    }
    let fold = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
    [fold(ex), fold(ey), fold(ez), fold(ph)]
}

fn check_softening(softening: f64) -> Result<f64> {
    if softening >= 0.0 && softening.is_finite() {
        Ok(softening * softening)
    } else {
        Err(Error::param("softening", format!("{softening} must be a nonnegative number")))
    }
}

fn self_sums<const POT: bool>(ens: &ParticleEnsemble, softening: f64) -> Result<Vec<[f64; 4]>> {
    let eps2 = check_softening(softening)?;
    let soa = Soa::new(&ens.positions, &ens.weights);
    let n = ens.len();
    let out = crate::par::map_indexed(n, |i| {
        let p = ens.positions[i];
        let a = sum_range::<POT>(&soa, 0, i, &p, eps2);
        let b = sum_range::<POT>(&soa, i + 1, n, &p, eps2);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
    });
    if let Some(i) = out.iter().position(|s| !s.iter().all(|c| c.is_finite())) {
        return Err(Error::Singular { what: format!("particle {i} coincides with another particle") });
    }
    Ok(out)
}

/// E_i = Σ_{j≠i} w_j (x_i − x_j)/(|x_i − x_j|² + ε²)^{3/2}.
pub fn pairwise_field(ens: &ParticleEnsemble, softening: f64) -> Result<Vec<Vec3>> {
    Ok(self_sums::<false>(ens, softening)?.into_iter().map(|s| Vec3::new(s[0], s[1], s[2])).collect())
}

/// E_i together with φ_i = Σ_{j≠i} w_j/(|x_i − x_j|² + ε²)^{1/2}.
pub fn pairwise_potential(ens: &ParticleEnsemble, softening: f64) -> Result<(Vec<Vec3>, Vec<f64>)> {
    let sums = self_sums::<true>(ens, softening)?;
    Ok((sums.iter().map(|s| Vec3::new(s[0], s[1], s[2])).collect(), sums.iter().map(|s| s[3]).collect()))
}

/// Plasma field at arbitrary points (every particle contributes).
pub fn field_at_points(points: &[Vec3], ens: &ParticleEnsemble, softening: f64) -> Result<Vec<Vec3>> {
    let eps2 = check_softening(softening)?;
    let soa = Soa::new(&ens.positions, &ens.weights);
    let out = crate::par::map_indexed(points.len(), |i| sum_range::<false>(&soa, 0, ens.len(), &points[i], eps2));
    if let Some(i) = out.iter().position(|s| !s.iter().all(|c| c.is_finite())) {
        return Err(Error::Singular { what: format!("point {i} coincides with a particle") });
    }
    Ok(out.into_iter().map(|s| Vec3::new(s[0], s[1], s[2])).collect())
}

/// Charge field on every particle, (x_i − ξ)/(|x_i − ξ|² + ε²)^{3/2}, and the
/// reaction field on the charge Σ_i w_i (ξ − x_i)/(...)^{3/2}.
pub fn charge_forces(ens: &ParticleEnsemble, xi: &Vec3, softening: f64) -> Result<(Vec<Vec3>, Vec3)> {
    let eps2 = check_softening(softening)?;
    let mut on_particles = Vec::with_capacity(ens.len());
    let mut on_charge = Vec3::zeros();
    for (i, (x, w)) in ens.positions.iter().zip(&ens.weights).enumerate() {
        let z = x - xi;
        let r2 = z.norm_squared() + eps2;
        if r2 == 0.0 {
            return Err(Error::Singular { what: format!("particle {i} sits on the charge") });
        }
        let f = z / (r2 * r2.sqrt());
        on_charge -= f * *w;
        on_particles.push(f);
    }
    Ok((on_particles, on_charge))
}

/// Half the mean interparticle distance, (V/N)^{1/3}/2, with V the volume of
/// a ball of radius √(5/3)·(rms distance to the centroid); that radius gives
/// a uniform ball the same rms radius.
pub fn mean_spacing_softening(ens: &ParticleEnsemble) -> f64 {
    let n = ens.len();
    if n < 2 {
        return 0.0;
    }
    let c = ens.positions.iter().fold(Vec3::zeros(), |a, p| a + p) / n as f64;
    let ms = ens.positions.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / n as f64;
    let rg = (5.0 / 3.0 * ms).sqrt();
    let vol = 4.0 / 3.0 * std::f64::consts::PI * rg.powi(3);
    0.5 * (vol / n as f64).cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(pos: &[[f64; 3]], w: &[f64]) -> ParticleEnsemble {
        ParticleEnsemble::new(
            pos.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            vec![Vec3::zeros(); pos.len()],
            w.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn single_pair() {
        let e = ens(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], &[1.0, 1.0]);
        let f = pairwise_field(&e, 0.0).unwrap();
        assert_eq!(f[0], Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(f[1], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn one_particle_has_no_field() {
        let e = ens(&[[0.3, 0.1, 0.0]], &[2.0]);
        assert_eq!(pairwise_field(&e, 0.0).unwrap(), vec![Vec3::zeros()]);
    }

    #[test]
    fn coincident_unsoftened_pair_errors() {
        let e = ens(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], &[1.0, 1.0]);
        assert!(pairwise_field(&e, 0.0).is_err());
        assert!(pairwise_field(&e, 0.1).is_ok());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn lanes_match_naive_sum() {
        let pos: Vec<[f64; 3]> =
            (0..13).map(|i| [i as f64 * 0.37, (i * i) as f64 * 0.11 % 1.3, (i as f64).sin()]).collect();
        let w: Vec<f64> = (0..13).map(|i| 0.1 + i as f64 * 0.01).collect();
        let e = ens(&pos, &w);
        let (f, phi) = pairwise_potential(&e, 0.05).unwrap();
        for i in 0..13 {
            let mut acc = Vec3::zeros();
            let mut p = 0.0;
            for j in 0..13 {
                if i != j {
                    let d = e.positions[i] - e.positions[j];
                    let r = (d.norm_squared() + 0.0025).sqrt();
                    acc += d * (w[j] / (r * r * r));
                    p += w[j] / r;
                }
            }
            assert!((acc - f[i]).norm() < 1e-12 * acc.norm().max(1.0));
            assert!((p - phi[i]).abs() < 1e-12 * p);
        }
    }
}
