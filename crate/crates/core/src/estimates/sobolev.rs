use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{field_lq_norm, rho_lp_norm, solve_poisson};
use crate::model::{GridField, Vec3};

/// Relative tolerance on the dilation behaviour of the ratio.
pub const SOBOLEV_TOL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub s: f64,
    /// 3s/(3 − s), or ∞ for s > 3 (serialized as null).
    pub q: f64,
    pub e_norm: f64,
    pub rho_norm: f64,
    pub ratio: f64,
    pub dilation: f64,
    /// Ratio of the dilated field over the ratio of the undilated one, both
    /// from the grid solver.
    pub ratio_change: f64,
    /// λ^{1−3/s} for s > 3, 1 otherwise: ρ(·/λ) has field λE(·/λ), so
    /// ‖E‖_q/‖ρ‖_s is dilation invariant exactly when q = 3s/(3 − s).
    pub expected_change: f64,
    pub vacuous: bool,
    pub pass: bool,
}

/// Trilinear resampling of ρ about the grid centre, x' = c + λ(x − c),
/// onto a grid with the same spacing.
pub fn dilate_grid(grid: &GridField, lambda: f64) -> Result<GridField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("dilation", format!("{lambda} must be positive")));
    }
    let h = grid.spacing;
    let center = grid.origin + 0.5 * (grid.upper_corner() - grid.origin);
    let dims = grid.dims.map(|n| ((lambda * (n as f64 - 1.0)).round() as usize + 1).max(2));
    let extent = Vec3::new(dims[0] as f64 - 1.0, dims[1] as f64 - 1.0, dims[2] as f64 - 1.0) * h;
    let origin = center - 0.5 * extent;
    let [nx, ny, nz] = grid.dims;
    let sample = |p: Vec3| -> f64 {
        let u = (p - grid.origin) / h;
        let (i0, j0, k0) = (u.x.floor(), u.y.floor(), u.z.floor());
        if i0 < 0.0 || j0 < 0.0 || k0 < 0.0 {
            return 0.0;
        }
        let (i, j, k) = (i0 as usize, j0 as usize, k0 as usize);
        let (fx, fy, fz) = (u.x - i0, u.y - j0, u.z - k0);
        let mut acc = 0.0;
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
                    let w = wx * wy * wz;
                    if w == 0.0 {
                        continue;
                    }
                    let (a, b, c) = (i + di, j + dj, k + dk);
                    if a < nx && b < ny && c < nz {
                        acc += w * grid.rho[grid.index(a, b, c)];
                    }
                }
            }
        }
        acc
    };
    let mut rho = vec![0.0; dims[0] * dims[1] * dims[2]];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let x = origin + Vec3::new(i as f64, j as f64, k as f64) * h;
                rho[(i * dims[1] + j) * dims[2] + k] = sample(center + (x - center) / lambda);
            }
        }
    }
    Ok(GridField { origin, spacing: h, dims, rho, e: Vec::new() })
}

fn exponent_q(s: f64) -> Result<f64> {
    if s > 1.0 && s < 3.0 {
        Ok(3.0 * s / (3.0 - s))
    } else if s > 3.0 {
        Ok(f64::INFINITY)
    } else {
        Err(Error::param("s", format!("{s} must lie in (1, 3) or (3, ∞)")))
    }
}

/// ‖E‖_q / ‖ρ‖_s on the grid with q = 3s/(3 − s) (or ∞ for s > 3), and its
/// behaviour when ρ is dilated by a factor 2.
pub fn check_sobolev(grid: &GridField, s: f64) -> Result<SobolevReport> {
    check_sobolev_with(grid, s, 2.0)
}

pub fn check_sobolev_with(grid: &GridField, s: f64, dilation: f64) -> Result<SobolevReport> {
    let q = exponent_q(s)?;
    let expected_change = if s > 3.0 { dilation.powf(1.0 - 3.0 / s) } else { 1.0 };
    let rho_norm = rho_lp_norm(grid, s);
    if rho_norm == 0.0 {
        return Ok(SobolevReport {
            s,
            q,
            e_norm: 0.0,
            rho_norm,
            ratio: 0.0,
            dilation,
            ratio_change: 1.0,
            expected_change,
            vacuous: true,
            pass: true,
        });
    }
    let base = if grid.e.len() == grid.rho.len() {
        grid.clone()
    } else {
        solve_poisson(grid.origin, grid.spacing, grid.dims, grid.rho.clone())?
    };
    let e_norm = field_lq_norm(&base, q);
    let ratio = e_norm / rho_norm;
    let resolved = solve_poisson(grid.origin, grid.spacing, grid.dims, grid.rho.clone())?;
    let plain = field_lq_norm(&resolved, q) / rho_norm;
    let d = dilate_grid(grid, dilation)?;
    let d = solve_poisson(d.origin, d.spacing, d.dims, d.rho)?;
    let dilated = field_lq_norm(&d, q) / rho_lp_norm(&d, s);
    let ratio_change = dilated / plain;
    let pass = ratio.is_finite() && (ratio_change / expected_change - 1.0).abs() <= SOBOLEV_TOL;
    Ok(SobolevReport { s, q, e_norm, rho_norm, ratio, dilation, ratio_change, expected_change, vacuous: false, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_equal_three_is_rejected() {
        let g = GridField::zeros(Vec3::zeros(), 1.0, [2, 2, 2]);
        assert!(check_sobolev(&g, 3.0).is_err());
        assert!(check_sobolev(&g, 1.0).is_err());
    }

    #[test]
    fn dilation_keeps_same_spacing() {
        let g = GridField::zeros(Vec3::zeros(), 0.5, [5, 5, 5]);
        let d = dilate_grid(&g, 2.0).unwrap();
        assert_eq!(d.dims, [9, 9, 9]);
        assert_eq!(d.spacing, 0.5);
        assert!((d.origin - Vec3::new(-1.0, -1.0, -1.0)).norm() < 1e-12);
    }
}
