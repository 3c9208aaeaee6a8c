//! Numerical checks of the a priori estimates. Every check returns a report
//! with a `pass` field and the ratio that decided it.

mod duhamel;
mod interp;
mod moments;
mod sobolev;

pub use duhamel::{
    duhamel_default, duhamel_for_run, duhamel_level, duhamel_split_check, DuhamelLevel, DuhamelReport,
    ManufacturedConfig, RadialProfile, Resolution, SplitMode,
};
pub use interp::{
    check_interpolation_moment, check_rho_interpolation, check_rho_interpolation_profile, interp_constant,
    InterpReport, RhoInterpReport, VelocityDensity,
};
pub use moments::{
    check_conservation, check_energy_velocity, check_field_growth, check_moment_ode, check_polynomial_bound,
    check_virial, linear_envelope, ConservationReport, EnergyVelocityReport, Envelope, FieldGrowthReport,
    IntegratedCheck, MomentOdeReport, PolynomialReport, VirialReport, ENERGY_DRIFT_TOL, VIRIAL_TOL,
};
pub use sobolev::{check_sobolev, check_sobolev_with, dilate_grid, SobolevReport, SOBOLEV_TOL};
