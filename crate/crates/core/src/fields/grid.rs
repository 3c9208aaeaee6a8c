use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridField, ParticleEnsemble, Vec3};

/// Average of 1/|x| over the unit cube centred at the origin; used as the
/// self term of the node Green's function (scaled by 1/h).
const CUBE_MEAN_INV_R: f64 = 2.380_077_364_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridSpec {
    Fixed {
        origin: Vec3,
        spacing: f64,
        dims: [usize; 3],
    },
    /// Cubic cells sized so that `cells` cells span the longest side of the
    /// padded bounding box; `padding` is a fraction of that side.
    Auto {
        cells: usize,
        padding: f64,
    },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto { cells: 32, padding: 0.25 }
    }
}

/// Origin, spacing and node counts for `spec`, covering the ensemble and
/// the extra points.
pub fn resolve_grid(spec: &GridSpec, ens: &ParticleEnsemble, extra: &[Vec3]) -> Result<(Vec3, f64, [usize; 3])> {
    match spec {
        GridSpec::Fixed { origin, spacing, dims } => {
            if !(*spacing > 0.0) || dims.iter().any(|d| *d < 2) {
                return Err(Error::param("grid", "fixed grid needs spacing > 0 and at least 2 nodes per axis"));
            }
            Ok((*origin, *spacing, *dims))
        }
        GridSpec::Auto { cells, padding } => {
            if *cells < 2 || !(*padding >= 0.0) {
                return Err(Error::param("grid", "auto grid needs cells >= 2 and padding >= 0"));
            }
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for p in ens.positions.iter().chain(extra) {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            if !lo.x.is_finite() {
                lo = Vec3::repeat(-1.0);
                hi = Vec3::repeat(1.0);
            }
            let side = (hi - lo).max().max(1e-12);
            let pad = padding * side;
            let h = (side + 2.0 * pad) / *cells as f64;
            let mut dims = [0usize; 3];
            for a in 0..3 {
                dims[a] = (((hi[a] - lo[a]) + 2.0 * pad) / h).ceil() as usize + 2;
            }
            Ok((lo - Vec3::repeat(pad + 0.5 * h), h, dims))
        }
    }
}

fn cell_of(u: f64, n: usize) -> Option<(usize, f64)> {
    let i = u.floor();
    if i >= 0.0 && (i as usize) + 1 < n {
        Some((i as usize, u - i))
    } else if u == (n - 1) as f64 {
        // exactly on the last node
        Some((n - 2, 1.0))
    } else {
        None
    }
}

/// Cloud-in-cell deposition onto nodes; returns ρ (mass per volume).
pub fn deposit_cic(ens: &ParticleEnsemble, origin: &Vec3, spacing: f64, dims: [usize; 3]) -> Result<Vec<f64>> {
    let [nx, ny, nz] = dims;
    let mut rho = vec![0.0; nx * ny * nz];
    let inv_vol = 1.0 / spacing.powi(3);
    let mut outside = 0;
    for (x, w) in ens.positions.iter().zip(&ens.weights) {
        let u = (x - origin) / spacing;
        let (Some((i, fx)), Some((j, fy)), Some((k, fz))) = (cell_of(u.x, nx), cell_of(u.y, ny), cell_of(u.z, nz))
        else {
            outside += 1;
            continue;
        };
        let q = w * inv_vol;
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
                    rho[((i + di) * ny + j + dj) * nz + k + dk] += q * wx * wy * wz;
                }
            }
        }
    }
    if outside > 0 {
        return Err(Error::OutsideGrid { count: outside });
    }
    Ok(rho)
}

struct Fft3 {
    dims: [usize; 3],
    plans: [std::sync::Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(dims: [usize; 3], inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let mut plan = |n| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let p0 = plan(dims[0]);
        let p1 = plan(dims[1]);
        let p2 = plan(dims[2]);
        Fft3 { dims, plans: [p0, p1, p2] }
    }

    fn process(&self, data: &mut [Complex<f64>]) {
        let [n0, n1, n2] = self.dims;
        for row in data.chunks_exact_mut(n2) {
            self.plans[2].process(row);
        }
        let mut line = vec![Complex::new(0.0, 0.0); n1.max(n0)];
        for i in 0..n0 {
            for k in 0..n2 {
                for j in 0..n1 {
                    line[j] = data[(i * n1 + j) * n2 + k];
                }
                self.plans[1].process(&mut line[..n1]);
                for j in 0..n1 {
                    data[(i * n1 + j) * n2 + k] = line[j];
                }
            }
        }
        for j in 0..n1 {
            for k in 0..n2 {
                for i in 0..n0 {
                    line[i] = data[(i * n1 + j) * n2 + k];
                }
                self.plans[0].process(&mut line[..n0]);
                for i in 0..n0 {
                    data[(i * n1 + j) * n2 + k] = line[i];
                }
            }
        }
    }
}

/// Free-space potential φ = Σ_nodes q G by zero-padded FFT convolution
/// (Hockney), G(r) = 1/r off the origin, then E = −∇φ by central
/// differences (one-sided on the boundary). −∇(1/|x|) = x/|x|³, so this is
/// the x/|x|³ convolution with no 4π factor.
pub fn solve_poisson(origin: Vec3, spacing: f64, dims: [usize; 3], rho: Vec<f64>) -> Result<GridField> {
    let [nx, ny, nz] = dims;
    if rho.len() != nx * ny * nz {
        return Err(Error::param("rho", "array length does not match grid dims"));
    }
    let mut field = GridField { origin, spacing, dims, rho, e: vec![Vec3::zeros(); nx * ny * nz] };
    if field.rho.iter().all(|r| *r == 0.0) {
        return Ok(field);
    }
    let pd = [2 * nx, 2 * ny, 2 * nz];
    let total = pd[0] * pd[1] * pd[2];
    let pidx = |i: usize, j: usize, k: usize| (i * pd[1] + j) * pd[2] + k;
    let vol = spacing.powi(3);

    let mut kernel = vec![Complex::new(0.0, 0.0); total];
    let off = |a: usize, n: usize| if a < n { a as f64 } else { a as f64 - 2.0 * n as f64 };
    for i in 0..pd[0] {
        let dx = off(i, nx);
        for j in 0..pd[1] {
            let dy = off(j, ny);
            for k in 0..pd[2] {
                let dz = off(k, nz);
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                let g = if r == 0.0 { CUBE_MEAN_INV_R } else { 1.0 / r };
                kernel[pidx(i, j, k)] = Complex::new(g / spacing, 0.0);
            }
        }
    }
    let mut charge = vec![Complex::new(0.0, 0.0); total];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                charge[pidx(i, j, k)] = Complex::new(field.rho[field.index(i, j, k)] * vol, 0.0);
            }
        }
    }
    let fwd = Fft3::new(pd, false);
    fwd.process(&mut kernel);
    fwd.process(&mut charge);
    for (c, g) in charge.iter_mut().zip(&kernel) {
        *c *= g;
    }
    Fft3::new(pd, true).process(&mut charge);
    let norm = 1.0 / total as f64;
    let mut phi = vec![0.0; nx * ny * nz];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                phi[field.index(i, j, k)] = charge[pidx(i, j, k)].re * norm;
            }
        }
    }
    let h = spacing;
    let diff = |lo: f64, mid: f64, hi: f64, at_lo: bool, at_hi: bool| -> f64 {
        if at_lo {
            (hi - mid) / h
        } else if at_hi {
            (mid - lo) / h
        } else {
            (hi - lo) / (2.0 * h)
        }
    };
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let c = phi[field.index(i, j, k)];
                let gx = diff(
                    if i > 0 { phi[field.index(i - 1, j, k)] } else { c },
                    c,
                    if i + 1 < nx { phi[field.index(i + 1, j, k)] } else { c },
                    i == 0,
                    i + 1 == nx,
                );
                let gy = diff(
                    if j > 0 { phi[field.index(i, j - 1, k)] } else { c },
                    c,
                    if j + 1 < ny { phi[field.index(i, j + 1, k)] } else { c },
                    j == 0,
                    j + 1 == ny,
                );
                let gz = diff(
                    if k > 0 { phi[field.index(i, j, k - 1)] } else { c },
                    c,
                    if k + 1 < nz { phi[field.index(i, j, k + 1)] } else { c },
                    k == 0,
                    k + 1 == nz,
                );
                let idx = field.index(i, j, k);
                field.e[idx] = -Vec3::new(gx, gy, gz);
            }
        }
    }
    Ok(field)
}

/// Deposit, solve, and return the grid field of an ensemble.
pub fn grid_field(ens: &ParticleEnsemble, spec: &GridSpec) -> Result<GridField> {
    grid_field_covering(ens, spec, &[])
}

pub(crate) fn grid_field_covering(ens: &ParticleEnsemble, spec: &GridSpec, extra: &[Vec3]) -> Result<GridField> {
    let (origin, spacing, dims) = resolve_grid(spec, ens, extra)?;
    let rho = deposit_cic(ens, &origin, spacing, dims)?;
    solve_poisson(origin, spacing, dims, rho)
}

/// Trilinear interpolation of the node field E at x.
pub fn interpolate_e(grid: &GridField, x: &Vec3) -> Result<Vec3> {
    let u = (x - grid.origin) / grid.spacing;
    let (Some((i, fx)), Some((j, fy)), Some((k, fz))) =
        (cell_of(u.x, grid.dims[0]), cell_of(u.y, grid.dims[1]), cell_of(u.z, grid.dims[2]))
    else {
        return Err(Error::OutsideGrid { count: 1 });
    };
    let mut e = Vec3::zeros();
    for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
                e += grid.e[grid.index(i + di, j + dj, k + dk)] * (wx * wy * wz);
            }
        }
    }
    Ok(e)
}

fn lq(values: impl Iterator<Item = f64>, vol: f64, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|v| v.powf(q)).sum::<f64>() * vol).powf(1.0 / q)
    }
}

/// (Σ_nodes |E|^q h³)^{1/q}, or max |E| for q = ∞.
pub fn field_lq_norm(grid: &GridField, q: f64) -> f64 {
    lq(grid.e.iter().map(|e| e.norm()), grid.cell_volume(), q)
}

/// (Σ_nodes ρ^p h³)^{1/p}, or max ρ for p = ∞.
pub fn rho_lp_norm(grid: &GridField, p: f64) -> f64 {
    lq(grid.rho.iter().cloned(), grid.cell_volume(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_charges_far_apart() {
        // Unit charge 10 cells away: the central difference of 1/r is exact
        // up to rounding, since G = 1/r off the origin.
        let h = 0.1;
        let dims = [24, 8, 8];
        let origin = Vec3::zeros();
        let mut rho = vec![0.0; 24 * 8 * 8];
        let idx = |i: usize, j: usize, k: usize| (i * 8 + j) * 8 + k;
        rho[idx(5, 4, 4)] = 1.0 / h / h / h;
        let g = solve_poisson(origin, h, dims, rho).unwrap();
        let e = g.e[idx(15, 4, 4)];
        let fd = (1.0 / 0.9 - 1.0 / 1.1) / (2.0 * h);
        assert!((e.x - fd).abs() < 1e-10, "{e:?}");
        assert!(e.y.abs() < 1e-10 && e.z.abs() < 1e-10);
    }

    #[test]
    fn constant_field_norm() {
        let mut g = GridField::zeros(Vec3::zeros(), 0.5, [4, 4, 4]);
        for e in g.e.iter_mut() {
            *e = Vec3::new(0.0, 3.0, 4.0);
        }
        let vol: f64 = 64.0 * 0.125;
        assert!((field_lq_norm(&g, 2.0) - 5.0 * vol.sqrt()).abs() < 1e-12);
        assert_eq!(field_lq_norm(&g, f64::INFINITY), 5.0);
    }
}
