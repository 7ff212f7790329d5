//! Pose-only proportional controller with feed-forward and fixed damping.

use nalgebra::DVector;

use crate::constraints::slew_limit;
use crate::controller::{step_count, ClosedLoopRun, TraceRow};
use crate::error::{Result, UtcError};
use crate::noise::{ALPHA, DAMPING};
use crate::plants::PlantModel;
use crate::reference::Reference;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub kp: f64,
    pub kff: f64,
    /// Fixed yaw damping moment coefficient.
    pub damping: f64,
    /// rad
    pub alpha_limit: f64,
    /// rad / s
    pub alpha_slew: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            kp: 1.5,
            kff: 0.1,
            damping: 0.5,
            alpha_limit: 1.5,
            alpha_slew: 3.5,
        }
    }
}

impl BaselineParams {
    /// Unlimited-rate pattern command, clamped to the alpha limit.
    pub fn command(&self, yr_ref: f64, yr_real: f64) -> f64 {
        let raw = self.kp * (yr_ref - yr_real) + self.kff * yr_ref;
        raw.clamp(-self.alpha_limit, self.alpha_limit)
    }
}

/// Default baseline command for a reference and measured yaw rate.
pub fn baseline_pose_controller(yr_ref: f64, yr_real: f64) -> f64 {
    BaselineParams::default().command(yr_ref, yr_real)
}

/// Run the baseline against a four-control yaw plant from its initial state.
pub fn run_baseline<P: PlantModel + ?Sized>(
    plant: &P,
    reference: &dyn Reference,
    params: &BaselineParams,
    dt: f64,
    duration: f64,
) -> Result<ClosedLoopRun> {
    if plant.control_dim() != 4 || plant.output_dim() != 1 {
        return Err(UtcError::config(
            "controller.kind",
            "baseline_pose needs the four-control yaw plant",
        ));
    }
    if !(duration > 0.0) {
        return Err(UtcError::config("sim.duration", "must be positive"));
    }
    let mut run = ClosedLoopRun::default();
    let mut x = plant.initial_state();
    let mut alpha = 0.0;
    for k in 0..=step_count(duration, dt) {
        let t = k as f64 * dt;
        let yr_ref = reference.value(t);
        let yr_real = plant.output(&x)[0];
        alpha = slew_limit(
            alpha,
            params.command(yr_ref, yr_real),
            params.alpha_slew,
            dt,
        );
        let mut u = DVector::zeros(4);
        u[DAMPING] = params.damping;
        u[ALPHA] = alpha;
        run.rows.push(TraceRow {
            k,
            t,
            yr_ref,
            yr_real,
            u: u.clone(),
            ypred: None,
            pu_trace: None,
            k_gain_norm: None,
        });
        let next = plant.step(&x, &u, dt);
        run.states.push(std::mem::replace(&mut x, next));
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{LinearPlant, SurrogateYawPlant};
    use crate::reference::SineReference;

    #[test]
    fn command_examples() {
        assert_eq!(baseline_pose_controller(0.0, 0.0), 0.0);
        assert_eq!(baseline_pose_controller(6.9813, 0.0), 1.5);
        assert!((baseline_pose_controller(1.0, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn run_respects_slew_and_damping() {
        let plant = SurrogateYawPlant::default();
        let dt = 0.0042;
        let run = run_baseline(
            &plant,
            &SineReference::fast_turn(),
            &BaselineParams::default(),
            dt,
            3.0,
        )
        .unwrap();
        assert_eq!(run.rows.len(), step_count(3.0, dt) + 1);
        for w in run.rows.windows(2) {
            assert!((w[1].u[ALPHA] - w[0].u[ALPHA]).abs() <= 3.5 * dt + 1e-12);
            assert_eq!(w[1].u[DAMPING], 0.5);
        }
    }

    #[test]
    fn rejects_scalar_plant() {
        let r = run_baseline(
            &LinearPlant::default(),
            &SineReference::fast_turn(),
            &BaselineParams::default(),
            0.01,
            1.0,
        );
        assert!(matches!(r, Err(UtcError::Config { .. })));
    }
}
