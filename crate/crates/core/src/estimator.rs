//! Input estimation: recover the control sequence that explains a recorded
//! trajectory, using the controller's own sigma-point machinery with the
//! recorded future output in place of the reference.

use nalgebra::DVector;

use crate::controller::{UtcConfig, UtcController};
use crate::error::{Result, UtcError};
use crate::plants::PlantModel;
use crate::reference::SampledReference;

/// Uniformly sampled plant states and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedTrajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
    pub dt: f64,
}

impl RecordedTrajectory {
    pub fn new(
        times: Vec<f64>,
        outputs: Vec<DVector<f64>>,
        states: Vec<DVector<f64>>,
        dt: f64,
    ) -> Result<Self> {
        if times.len() != outputs.len() || times.len() != states.len() {
            return Err(UtcError::Contract(format!(
                "trajectory lengths differ: {} times, {} outputs, {} states",
                times.len(),
                outputs.len(),
                states.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(UtcError::Contract(format!(
                "sample period {dt} must be positive"
            )));
        }
        for (k, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * (1.0 + dt) {
                return Err(UtcError::Contract(format!(
                    "non-uniform sampling between samples {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(Self {
            times,
            outputs,
            states,
            dt,
        })
    }

    /// Simulate `plant` from its initial state under `inputs`, one input per sample.
    pub fn simulate<P: PlantModel + ?Sized>(plant: &P, inputs: &[DVector<f64>], dt: f64) -> Self {
        let mut x = plant.initial_state();
        let mut traj = Self {
            times: Vec::with_capacity(inputs.len()),
            outputs: Vec::with_capacity(inputs.len()),
            states: Vec::with_capacity(inputs.len()),
            dt,
        };
        for (k, u) in inputs.iter().enumerate() {
            traj.times.push(k as f64 * dt);
            traj.outputs.push(plant.output(&x));
            let next = plant.step(&x, u, dt);
            traj.states.push(std::mem::replace(&mut x, next));
        }
        traj
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Estimator defaults: the given controller config with a 0.25 s horizon and
/// the hold policy (no assumed input dynamics).
pub fn estimation_config(base: &UtcConfig) -> UtcConfig {
    let mut cfg = base.clone();
    cfg.horizon_steps = ((0.25 / cfg.dt).round() as usize).max(1);
    cfg.policy = crate::plants::ControlDynamicsPolicy::hold_constant();
    cfg
}

/// Estimated input for every sample that has a full horizon ahead of it.
pub fn estimate_inputs<P: PlantModel + ?Sized>(
    traj: &RecordedTrajectory,
    plant: &P,
    cfg: &UtcConfig,
) -> Result<Vec<DVector<f64>>> {
    let horizon = cfg.horizon_steps;
    if traj.len() <= horizon {
        return Err(UtcError::InputTooShort {
            len: traj.len(),
            horizon,
        });
    }
    if (traj.dt - cfg.dt).abs() > 1e-12 {
        return Err(UtcError::Contract(format!(
            "trajectory dt {} differs from controller dt {}",
            traj.dt, cfg.dt
        )));
    }
    if plant.output_dim() != 1 {
        return Err(UtcError::Contract(
            "estimation needs a scalar output".into(),
        ));
    }
    let reference = SampledReference {
        samples: traj.outputs.iter().map(|y| y[0]).collect(),
        dt: traj.dt,
    };
    let mut ctl = UtcController::new(plant, cfg.clone())?;
    let n = traj.len() - horizon;
    let mut estimates = Vec::with_capacity(n);
    for k in 0..n {
        let prev = traj.outputs[k.saturating_sub(1)].clone();
        let record = ctl.step(k, &traj.states[k], &reference, Some(prev))?;
        estimates.push(record.u_cmd);
    }
    Ok(estimates)
}
