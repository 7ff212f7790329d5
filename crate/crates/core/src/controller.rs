//! The unscented transform controller.
//!
//! Each step samples the control belief, lets every sigma point drive its own
//! copy of the plant over the prediction horizon, and treats the future
//! reference as a measurement of the predicted output: the Kalman-style gain
//! from the control/output cross-covariance moves the belief toward controls
//! whose predicted output meets the reference.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{clamp, reflect_collapsed, slew_limit_vector, ControlBounds};
use crate::error::{Result, UtcError};
use crate::noise::{self, CouplingKind, NoiseCouplingPolicy, NoiseSchedule};
use crate::plants::{
    embedded_control_step, ControlDynamicsKind, ControlDynamicsPolicy, PatternLimits, PlantModel,
    RateSamples,
};
use crate::reference::Reference;
use crate::ut_math::{
    generate_sigma_points, max_asymmetry, min_eigenvalue, psd_repair, weighted_cross_covariance,
    ControlBelief,
};

/// Process noise injected at each prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Constant(DMatrix<f64>),
    /// Four-channel yaw layout with sign couplings and hysteresis.
    /// `k_hyst` defaults to about one second of steps.
    Scheduled {
        policy: NoiseCouplingPolicy,
        k_hyst: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtcConfig {
    pub w0: f64,
    pub horizon_steps: usize,
    pub dt: f64,
    pub p_err: DMatrix<f64>,
    pub bounds: ControlBounds,
    pub policy: ControlDynamicsPolicy,
    /// Control element driven by `policy`; `None` holds every element.
    pub pattern_channel: Option<usize>,
    pub noise: NoiseModel,
    pub initial: ControlBelief,
}

impl UtcConfig {
    /// Yaw-control defaults: 20 horizon steps for the hold policy, 5 with the
    /// embedded PI law.
    pub fn yaw(kind: ControlDynamicsKind, coupling: CouplingKind) -> Self {
        let dt = 0.0042;
        let (horizon_steps, policy) = match kind {
            ControlDynamicsKind::HoldConstant => (20, ControlDynamicsPolicy::hold_constant()),
            ControlDynamicsKind::PiFeedforward => {
                (5, ControlDynamicsPolicy::pi_feedforward(5.0 * dt))
            }
        };
        Self {
            w0: 0.25,
            horizon_steps,
            dt,
            p_err: DMatrix::from_element(1, 1, 0.01 * 0.01),
            bounds: ControlBounds::yaw_default(),
            policy,
            pattern_channel: Some(noise::ALPHA),
            noise: NoiseModel::Scheduled {
                policy: NoiseCouplingPolicy::with_default_gains(coupling),
                k_hyst: None,
            },
            initial: noise::initial_belief(),
        }
    }

    /// Scalar-control defaults for the linear test plant.
    pub fn linear() -> Self {
        let p0 = DMatrix::from_element(1, 1, 1.0);
        Self {
            w0: 0.25,
            horizon_steps: 20,
            dt: 0.0042,
            p_err: DMatrix::from_element(1, 1, 0.01 * 0.01),
            bounds: ControlBounds::unlimited_rate(
                DVector::from_element(1, -10.0),
                DVector::from_element(1, 10.0),
            )
            .expect("static bounds"),
            policy: ControlDynamicsPolicy::hold_constant(),
            pattern_channel: None,
            noise: NoiseModel::Constant(&p0 * noise::QU_SCALE),
            initial: ControlBelief {
                mean: DVector::zeros(1),
                covariance: p0,
            },
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.initial.dim();
        if !(0.0..1.0).contains(&self.w0) {
            return Err(UtcError::config(
                "utc.w0",
                format!("must be in [0, 1), got {}", self.w0),
            ));
        }
        if self.horizon_steps == 0 {
            return Err(UtcError::config("utc.t_pred_steps", "must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(UtcError::config(
                "utc.dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !self.p_err.is_square()
            || max_asymmetry(&self.p_err) > 0.0
            || self.p_err.clone().cholesky().is_none()
        {
            return Err(UtcError::config(
                "utc.p_err",
                "must be symmetric positive definite",
            ));
        }
        if self.bounds.dim() != m {
            return Err(UtcError::config(
                "bounds.min",
                format!(
                    "bounds have {} elements, control has {m}",
                    self.bounds.dim()
                ),
            ));
        }
        if self.initial.covariance.shape() != (m, m) {
            return Err(UtcError::config(
                "utc.initial_cov",
                "shape mismatch with initial mean",
            ));
        }
        if let Some(p) = self.pattern_channel {
            if p >= m {
                return Err(UtcError::config("utc.pattern_channel", "out of range"));
            }
        }
        self.policy.validate()?;
        match &self.noise {
            NoiseModel::Constant(q) if q.shape() != (m, m) => Err(UtcError::config(
                "utc.qu",
                "shape mismatch with control dimension",
            )),
            NoiseModel::Scheduled {
                k_hyst: Some(0), ..
            } => Err(UtcError::config("noise.k_hyst", "must be >= 1")),
            NoiseModel::Scheduled { .. } if m != 4 => Err(UtcError::config(
                "noise.kind",
                "coupling policies need the 4-channel yaw control vector",
            )),
            _ => Ok(()),
        }
    }
}

/// Diagnostics of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct UtcStepRecord {
    pub k: usize,
    pub u_cmd: DVector<f64>,
    pub y_ref: DVector<f64>,
    pub ypred: DVector<f64>,
    pub cy: DMatrix<f64>,
    pub cuy: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub pu_trace: f64,
    pub pu_pred_trace: f64,
    /// Smallest eigenvalue of the downdated covariance before repair.
    pub pu_min_eig_pre_repair: f64,
    pub pu_min_eig: f64,
    pub terminal_outputs: Vec<DVector<f64>>,
}

/// Running state carried from one step to the next besides the belief.
#[derive(Debug, Clone, PartialEq)]
pub struct StepContext {
    /// Last command sent to the plant; the slew limit is enforced against it.
    pub prev_cmd: DVector<f64>,
    /// Plant output one step before the anchor state.
    pub prev_output: DVector<f64>,
}

/// Drive one sigma point through a copy of the plant for the horizon.
/// Returns the control applied at the last horizon step and the terminal output.
#[allow(clippy::too_many_arguments)]
pub fn propagate_sigma_point<P: PlantModel + ?Sized>(
    ui: &DVector<f64>,
    x_anchor: &DVector<f64>,
    plant: &P,
    cfg: &UtcConfig,
    reference: &dyn Reference,
    k: usize,
    ctx: &StepContext,
) -> (DVector<f64>, DVector<f64>) {
    let dt = cfg.dt;
    let mut x = x_anchor.clone();
    let mut applied = ui.clone();
    let mut y_prev = ctx.prev_output.clone();
    let mut y_now = plant.output(&x);

    let pattern = cfg.pattern_channel.map(|p| {
        let limits = PatternLimits {
            min: cfg.bounds.min[p],
            max: cfg.bounds.max[p],
            slew_rate: cfg.bounds.slew_rate[p],
        };
        let start = match cfg.policy.kind {
            ControlDynamicsKind::HoldConstant => {
                plant.actuator_state(x_anchor, p).unwrap_or(ctx.prev_cmd[p])
            }
            ControlDynamicsKind::PiFeedforward => ui[p],
        };
        (p, limits, start)
    });
    let mut alpha = pattern.map(|(_, _, start)| start).unwrap_or(0.0);

    for j in 0..cfg.horizon_steps {
        if let Some((p, limits, _)) = &pattern {
            let t = (k + j) as f64 * dt;
            let rates = RateSamples {
                now: y_now[0],
                prev: y_prev[0],
            };
            alpha =
                embedded_control_step(&cfg.policy, ui[*p], alpha, t, reference, rates, limits, dt);
            applied[*p] = alpha;
        }
        x = plant.step(&x, &applied, dt);
        y_prev = std::mem::replace(&mut y_now, plant.output(&x));
    }
    (applied, y_now)
}

/// One prediction/update cycle. Returns the new belief and the step record;
/// the command is the new belief mean.
#[allow(clippy::too_many_arguments)]
pub fn utc_step<P: PlantModel + ?Sized>(
    belief: &ControlBelief,
    x_anchor: &DVector<f64>,
    plant: &P,
    reference: &dyn Reference,
    k: usize,
    cfg: &UtcConfig,
    qu: &DMatrix<f64>,
    ctx: &StepContext,
) -> Result<(ControlBelief, UtcStepRecord)> {
    let bounds = &cfg.bounds;
    let sigma = generate_sigma_points(belief, cfg.w0)?;

    let mean = clamp(&belief.mean, bounds);
    let points: Vec<DVector<f64>> = sigma
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                mean.clone()
            } else {
                reflect_collapsed(p, &mean, bounds)
            }
        })
        .collect();

    let (finals, outputs): (Vec<_>, Vec<_>) = points
        .iter()
        .map(|ui| propagate_sigma_point(ui, x_anchor, plant, cfg, reference, k, ctx))
        .unzip();

    let u_pred = sigma.weighted_mean(&finals)?;
    let pu_pred = sigma.weighted_covariance(&finals, &u_pred, qu)?;
    let ypred = sigma.weighted_mean(&outputs)?;
    let cy = sigma.weighted_covariance(&outputs, &ypred, &cfg.p_err)?;
    let cuy = weighted_cross_covariance(&sigma.weights, &finals, &u_pred, &outputs, &ypred)?;

    let cy_inv =
        cy.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| UtcError::SingularInnovation {
                step: k,
                detail: format!("Cy = {cy:?}, Ypred = {ypred:?}"),
            })?;
    let gain = &cuy * cy_inv;

    let t_target = k as f64 * cfg.dt + cfg.horizon();
    let y_ref = DVector::from_element(ypred.len(), reference.value(t_target));
    let innovation = &y_ref - &ypred;
    let raw = &u_pred + &gain * innovation;
    let limited = slew_limit_vector(&ctx.prev_cmd, &clamp(&raw, bounds), bounds, cfg.dt);
    let new_mean = clamp(&limited, bounds);

    let downdated = &pu_pred - &gain * &cy * gain.transpose();
    let pu_min_eig_pre_repair = min_eigenvalue(&downdated);
    let covariance = psd_repair(&downdated);

    let record = UtcStepRecord {
        k,
        u_cmd: new_mean.clone(),
        y_ref,
        ypred,
        pu_trace: covariance.trace(),
        pu_pred_trace: pu_pred.trace(),
        pu_min_eig_pre_repair,
        pu_min_eig: min_eigenvalue(&covariance),
        cy,
        cuy,
        gain,
        terminal_outputs: outputs,
    };
    Ok((
        ControlBelief {
            mean: new_mean,
            covariance,
        },
        record,
    ))
}

/// Controller with its belief, last command and noise schedule.
pub struct UtcController<'p, P: PlantModel + ?Sized> {
    pub cfg: UtcConfig,
    plant: &'p P,
    belief: ControlBelief,
    schedule: Option<NoiseSchedule>,
    ctx: Option<StepContext>,
}

impl<'p, P: PlantModel + ?Sized> UtcController<'p, P> {
    pub fn new(plant: &'p P, cfg: UtcConfig) -> Result<Self> {
        cfg.validate()?;
        if plant.control_dim() != cfg.initial.dim() {
            return Err(UtcError::config(
                "utc.initial_mean",
                format!(
                    "plant takes {} controls, belief has {}",
                    plant.control_dim(),
                    cfg.initial.dim()
                ),
            ));
        }
        if plant.output_dim() != cfg.p_err.nrows() {
            return Err(UtcError::config(
                "utc.p_err",
                "dimension differs from plant output",
            ));
        }
        let schedule = match &cfg.noise {
            NoiseModel::Scheduled { policy, k_hyst } => {
                let mut schedule = NoiseSchedule::new(*policy, cfg.dt);
                if let Some(n) = k_hyst {
                    schedule.hysteresis.k_hyst = *n;
                }
                Some(schedule)
            }
            NoiseModel::Constant(_) => None,
        };
        let belief = ControlBelief {
            mean: clamp(&cfg.initial.mean, &cfg.bounds),
            covariance: cfg.initial.covariance.clone(),
        };
        Ok(Self {
            cfg,
            plant,
            belief,
            schedule,
            ctx: None,
        })
    }

    pub fn belief(&self) -> &ControlBelief {
        &self.belief
    }

    /// Noise covariance for step `k`, advancing the hysteresis.
    fn process_noise(&mut self, k: usize, reference: &dyn Reference) -> Result<DMatrix<f64>> {
        match (&mut self.schedule, &self.cfg.noise) {
            (Some(s), _) => s.next(k, reference, self.cfg.dt),
            (None, NoiseModel::Constant(q)) => Ok(q.clone()),
            (None, NoiseModel::Scheduled { .. }) => unreachable!("schedule built in new()"),
        }
    }

    /// Compute the command for step `k` from the plant state `x`.
    /// `prev_output` overrides the remembered previous output (used when
    /// replaying recorded data).
    pub fn step(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        reference: &dyn Reference,
        prev_output: Option<DVector<f64>>,
    ) -> Result<UtcStepRecord> {
        let y_now = self.plant.output(x);
        let mut ctx = self.ctx.take().unwrap_or_else(|| StepContext {
            prev_cmd: self.belief.mean.clone(),
            prev_output: y_now.clone(),
        });
        if let Some(y) = prev_output {
            ctx.prev_output = y;
        }
        let qu = self.process_noise(k, reference)?;
        let (belief, record) = utc_step(
            &self.belief,
            x,
            self.plant,
            reference,
            k,
            &self.cfg,
            &qu,
            &ctx,
        )?;
        self.belief = belief;
        self.ctx = Some(StepContext {
            prev_cmd: record.u_cmd.clone(),
            prev_output: y_now,
        });
        Ok(record)
    }
}

/// One row of a closed-loop trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub t: f64,
    pub yr_ref: f64,
    pub yr_real: f64,
    pub u: DVector<f64>,
    pub ypred: Option<f64>,
    pub pu_trace: Option<f64>,
    pub k_gain_norm: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ClosedLoopRun {
    pub rows: Vec<TraceRow>,
    /// Plant state at each row's time.
    pub states: Vec<DVector<f64>>,
    pub records: Vec<UtcStepRecord>,
}

/// A run that stopped early; `partial` holds everything up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: ClosedLoopRun,
    pub error: UtcError,
}

/// Number of steps after the initial sample for `duration` seconds.
pub fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize
}

/// Run the controller against the plant from its initial state for `duration`.
pub fn run_closed_loop<P: PlantModel + ?Sized>(
    plant: &P,
    reference: &dyn Reference,
    cfg: &UtcConfig,
    duration: f64,
) -> std::result::Result<ClosedLoopRun, Box<RunFailure>> {
    let mut run = ClosedLoopRun::default();
    let fail = |run: ClosedLoopRun, error| {
        Box::new(RunFailure {
            partial: run,
            error,
        })
    };
    if !(duration > 0.0) {
        return Err(fail(
            run,
            UtcError::config("sim.duration", "must be positive"),
        ));
    }
    let mut ctl = match UtcController::new(plant, cfg.clone()) {
        Ok(c) => c,
        Err(e) => return Err(fail(run, e)),
    };
    let dt = cfg.dt;
    let mut x = plant.initial_state();
    for k in 0..=step_count(duration, dt) {
        let record = match ctl.step(k, &x, reference, None) {
            Ok(r) => r,
            Err(e) => return Err(fail(run, e)),
        };
        let t = k as f64 * dt;
        run.rows.push(TraceRow {
            k,
            t,
            yr_ref: reference.value(t),
            yr_real: plant.output(&x)[0],
            u: record.u_cmd.clone(),
            ypred: Some(record.ypred[0]),
            pu_trace: Some(record.pu_trace),
            k_gain_norm: Some(record.gain.norm()),
        });
        let next = plant.step(&x, &record.u_cmd, dt);
        run.states.push(std::mem::replace(&mut x, next));
        run.records.push(record);
    }
    Ok(run)
}
