//! Time stepping of the coupled plasma/charge system, the backward flow of
//! the external field with its Jacobians, and the bound report on that flow.

mod bounds;
mod flow;
mod step;

pub use bounds::{flow_bound_report, BoundEntry, FlowBoundReport};
pub(crate) use flow::dp45;
pub use flow::{
    backward_flow, backward_flow_tol, probe_bundle, ExternalField, FlowProbe, LinearField, ProbeBundle,
    RunFieldHistory, StaticField, ZeroField, FLOW_TOL,
};
pub use step::{reverse_velocities, step, step_with, StepConfig, StepStats};
