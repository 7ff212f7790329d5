//! Unscented transform controller (UTC).
//!
//! A sigma-point predictive tracking controller: the control vector is
//! treated as the state of an unscented Kalman filter and the future reference
//! as its measurement. The crate ships the controller, its math kernels,
//! actuation constraints, a process-noise schedule, a linear test plant, a
//! yaw-dynamics surrogate plant, an input-estimation mode and a scenario
//! harness.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod noise;
pub mod plants;
pub mod reference;
pub mod ut_math;

pub use controller::{run_closed_loop, ClosedLoopRun, UtcConfig, UtcController, UtcStepRecord};
pub use error::{Result, UtcError};
pub use plants::{Plant, PlantModel};
pub use reference::Reference;
pub use ut_math::ControlBelief;
