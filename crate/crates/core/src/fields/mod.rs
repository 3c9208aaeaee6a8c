//! Coulomb fields: the point-charge field F, the plasma self-field E by
//! direct summation or on a grid, the χ_R cutoff split, and field norms.
//!
//! Kernel convention: E = ρ ∗ x/|x|³ with no 1/4π.

mod cutoff;
mod grid;
mod pairwise;

pub use cutoff::{
    chi0, chi0_d1, chi0_d2, cutoff_split, ext_bounds_at, ext_bounds_check, ext_field_at, ext_kernel,
    pairwise_field_split, CutoffSpec, ExtBoundsReport, ExtSource,
};
pub(crate) use grid::grid_field_covering;
pub use grid::{
    deposit_cic, field_lq_norm, grid_field, interpolate_e, resolve_grid, rho_lp_norm, solve_poisson, GridSpec,
};
pub use pairwise::{charge_forces, field_at_points, mean_spacing_softening, pairwise_field, pairwise_potential};

use crate::error::{Error, Result};
use crate::model::Vec3;

/// F(x) = (x − ξ)/|x − ξ|³.
pub fn charge_field(x: &Vec3, xi: &Vec3) -> Result<Vec3> {
    let z = x - xi;
    let r2 = z.norm_squared();
    if r2 == 0.0 {
        return Err(Error::Singular { what: format!("x = ξ = {:?}", xi.as_slice()) });
    }
    Ok(z / (r2 * r2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_field_examples() {
        let f = charge_field(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros()).unwrap();
        assert_eq!(f, Vec3::new(1.0, 0.0, 0.0));
        let f = charge_field(&Vec3::new(3.0, 1.0, 1.0), &Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(f, Vec3::new(0.25, 0.0, 0.0));
        assert!(charge_field(&Vec3::zeros(), &Vec3::zeros()).is_err());
    }
}
