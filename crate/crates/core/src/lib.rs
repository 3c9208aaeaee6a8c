//! Particle simulation of the three-dimensional Vlasov–Poisson system
//! coupled to a repulsive point charge, and numerical checks of the a priori
//! estimates that control it.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod initial_data;
pub mod io;
pub mod model;
mod par;

pub use error::{Error, Result};
pub use model::{ChargeState, GridField, Mat3, ParticleEnsemble, SimState, Vec3};
