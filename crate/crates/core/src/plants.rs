//! Plant contract, the linear test plant, the yaw surrogate and the
//! controller dynamics embedded in sigma-point propagation.

use std::str::FromStr;

use nalgebra::DVector;

use crate::constraints::slew_limit;
use crate::error::{Result, UtcError};
use crate::reference::Reference;

/// A deterministic discrete-time plant. Implementations hold only constants;
/// the state is passed in and returned by value.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64>;
    fn output(&self, x: &DVector<f64>) -> DVector<f64>;
    fn initial_state(&self) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }
    /// Value the actuator of control element `channel` currently holds, for
    /// plants whose state tracks it.
    fn actuator_state(&self, _x: &DVector<f64>, _channel: usize) -> Option<f64> {
        None
    }
}

/// First-order scalar plant `x' = -a x + b u`, Euler-integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPlant {
    pub a: f64,
    pub b: f64,
}

impl Default for LinearPlant {
    fn default() -> Self {
        Self { a: 2.0, b: 2.0 }
    }
}

impl LinearPlant {
    pub fn step_scalar(&self, x: f64, u: f64, dt: f64) -> f64 {
        x + dt * (-self.a * x + self.b * u)
    }
}

impl PlantModel for LinearPlant {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
        DVector::from_element(1, self.step_scalar(x[0], u[0], dt))
    }

    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
}

/// Three-state yaw surrogate, state `[yaw rate, roll angle, actual alpha]`,
/// control `[damping coeff, k_right, k_left, alpha command]`.
///
/// Hand pressure rolls the body through a first-order lag; the roll angle
/// exposes the torso to the sagittal hand force, which yaws the body. The
/// pose pattern adds a yaw moment proportional to alpha, and the damping
/// coefficient scales the resistance to yaw rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateYawPlant {
    /// kg m^2
    pub inertia: f64,
    /// N m / rad
    pub pattern_gain: f64,
    /// N m s / rad, multiplied by the damping coefficient
    pub damping_gain: f64,
    /// s
    pub roll_time_constant: f64,
    /// steady roll angle per unit `Mz / K_N`, rad / m
    pub roll_gain: f64,
    /// m
    pub yaw_lever: f64,
    /// m
    pub lx_hand: f64,
    /// N
    pub k_n: f64,
    /// rad
    pub alpha_limit: f64,
    /// rad / s
    pub alpha_slew: f64,
}

impl Default for SurrogateYawPlant {
    fn default() -> Self {
        Self {
            inertia: 12.0,
            pattern_gain: 96.0,
            damping_gain: 300.0,
            roll_time_constant: 0.4,
            roll_gain: 0.4,
            yaw_lever: 0.4,
            lx_hand: 0.35,
            k_n: 100.0,
            alpha_limit: 1.5,
            alpha_slew: 3.5,
        }
    }
}

impl SurrogateYawPlant {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("plant.inertia", self.inertia),
            ("plant.pattern_gain", self.pattern_gain),
            ("plant.damping_gain", self.damping_gain),
            ("plant.roll_time_constant", self.roll_time_constant),
            ("plant.roll_gain", self.roll_gain),
            ("plant.yaw_lever", self.yaw_lever),
            ("plant.lx_hand", self.lx_hand),
            ("plant.k_n", self.k_n),
            ("plant.alpha_limit", self.alpha_limit),
            ("plant.alpha_slew", self.alpha_slew),
        ];
        for (key, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(UtcError::config(key, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Roll moment (N m) and sagittal force (N) produced by hand pressure.
    pub fn hand_moments(&self, k_right: f64, k_left: f64) -> (f64, f64) {
        let mz = self.k_n * self.lx_hand * (k_right - k_left);
        let fy = -self.k_n * (k_right + k_left);
        (mz, fy)
    }
}

/// Hand roll moment and sagittal force with `K_N = 100 N`, `lx_hand = 0.35 m`.
pub fn hand_moments(k_right: f64, k_left: f64) -> (f64, f64) {
    SurrogateYawPlant::default().hand_moments(k_right, k_left)
}

impl PlantModel for SurrogateYawPlant {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        4
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
        let (omega, roll, alpha) = (x[0], x[1], x[2]);
        let (mz, fy) = self.hand_moments(u[1], u[2]);

        let roll_rate = (-roll + self.roll_gain * mz / self.k_n) / self.roll_time_constant;
        let alpha_next =
            slew_limit(alpha, u[3], self.alpha_slew, dt).clamp(-self.alpha_limit, self.alpha_limit);
        let yaw_moment = self.pattern_gain * alpha_next + self.yaw_lever * roll * (-fy)
            - self.damping_gain * u[0] * omega;

        DVector::from_vec(vec![
            omega + dt * yaw_moment / self.inertia,
            roll + dt * roll_rate,
            alpha_next,
        ])
    }

    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0])
    }

    fn actuator_state(&self, x: &DVector<f64>, channel: usize) -> Option<f64> {
        (channel == 3).then(|| x[2])
    }
}

/// Closed set of plants selectable from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plant {
    Linear(LinearPlant),
    SurrogateYaw(SurrogateYawPlant),
}

impl Plant {
    fn inner(&self) -> &dyn PlantModel {
        match self {
            Plant::Linear(p) => p,
            Plant::SurrogateYaw(p) => p,
        }
    }
}

impl PlantModel for Plant {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }

    fn control_dim(&self) -> usize {
        self.inner().control_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner().output_dim()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
        match self {
            Plant::Linear(p) => p.step(x, u, dt),
            Plant::SurrogateYaw(p) => p.step(x, u, dt),
        }
    }

    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Plant::Linear(p) => p.output(x),
            Plant::SurrogateYaw(p) => p.output(x),
        }
    }

    fn actuator_state(&self, x: &DVector<f64>, channel: usize) -> Option<f64> {
        self.inner().actuator_state(x, channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlDynamicsKind {
    /// Every channel held at its sigma-point value over the horizon.
    HoldConstant,
    /// Pattern channel follows an incremental PI law with reference feed-forward.
    PiFeedforward,
}

impl FromStr for ControlDynamicsKind {
    type Err = UtcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hold_constant" => Ok(Self::HoldConstant),
            "pi_feedforward" => Ok(Self::PiFeedforward),
            other => Err(UtcError::config(
                "utc.policy",
                format!("unknown control dynamics `{other}`"),
            )),
        }
    }
}

impl ControlDynamicsKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::HoldConstant => "hold_constant",
            Self::PiFeedforward => "pi_feedforward",
        }
    }
}

/// Expected dynamics of the pattern channel during prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDynamicsPolicy {
    pub kind: ControlDynamicsKind,
    pub kp: f64,
    pub kff: f64,
    /// Feed-forward look-ahead, s.
    pub tau: f64,
}

impl ControlDynamicsPolicy {
    pub fn hold_constant() -> Self {
        Self {
            kind: ControlDynamicsKind::HoldConstant,
            kp: 1.5,
            kff: 0.1,
            tau: 0.0,
        }
    }

    pub fn pi_feedforward(tau: f64) -> Self {
        Self {
            kind: ControlDynamicsKind::PiFeedforward,
            kp: 1.5,
            kff: 0.1,
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("utc.kp", self.kp),
            ("utc.kff", self.kff),
            ("utc.tau", self.tau),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(UtcError::config(key, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Limits of the pattern channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternLimits {
    pub min: f64,
    pub max: f64,
    pub slew_rate: Option<f64>,
}

/// Yaw-rate samples the embedded law differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSamples {
    pub now: f64,
    pub prev: f64,
}

/// Pattern command for one propagation step at time `t`.
///
/// `alpha_prev` is the previous pattern command; `target` is the sigma
/// point's pattern value (used by the hold policy only).
#[allow(clippy::too_many_arguments)]
pub fn embedded_control_step(
    policy: &ControlDynamicsPolicy,
    target: f64,
    alpha_prev: f64,
    t: f64,
    reference: &dyn Reference,
    yr_real: RateSamples,
    limits: &PatternLimits,
    dt: f64,
) -> f64 {
    let raw = match policy.kind {
        ControlDynamicsKind::HoldConstant => target,
        ControlDynamicsKind::PiFeedforward => {
            let tau = policy.tau;
            alpha_prev + policy.kp * (reference.value(t) - reference.value(t - dt))
                - policy.kp * (yr_real.now - yr_real.prev)
                + policy.kff * (reference.value(t + tau) - reference.value(t + tau - dt))
        }
    };
    let limited = match limits.slew_rate {
        Some(rate) => slew_limit(alpha_prev, raw, rate, dt),
        None => raw,
    };
    limited.clamp(limits.min, limits.max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ConstantReference;
    use nalgebra::dvector;

    const DT: f64 = 0.0042;

    #[test]
    fn linear_plant_steps() {
        let p = LinearPlant::default();
        assert_eq!(p.step_scalar(0.0, 0.0, 0.01), 0.0);
        assert!((p.step_scalar(0.0, 1.0, 0.01) - 0.02).abs() < 1e-15);
        let mut x = 0.0;
        for _ in 0..2000 {
            x = p.step_scalar(x, 0.7, 0.01);
        }
        assert!((x - 0.7).abs() < 1e-12);
    }

    #[test]
    fn hand_moment_examples() {
        assert_eq!(hand_moments(0.0, 0.0), (0.0, -0.0));
        let (mz, fy) = hand_moments(1.0, 0.0);
        assert!((mz - 35.0).abs() < 1e-12);
        assert_eq!(fy, -100.0);
        let (mz, fy) = hand_moments(2.0, 2.0);
        assert_eq!(mz, 0.0);
        assert_eq!(fy, -400.0);
    }

    #[test]
    fn surrogate_equilibrium() {
        let p = SurrogateYawPlant::default();
        let x = p.step(&DVector::zeros(3), &dvector![0.5, 0.0, 0.0, 0.0], DT);
        assert_eq!(x, DVector::zeros(3));
    }

    #[test]
    fn surrogate_steady_yaw_rate() {
        let p = SurrogateYawPlant::default();
        let u = dvector![0.5, 0.0, 0.0, 1.5];
        let mut x = DVector::zeros(3);
        // 96 * 1.5 / (300 * 0.5), time constant 12 / 150 s
        for _ in 0..(5.0 / DT) as usize {
            x = p.step(&x, &u, DT);
        }
        assert!((x[0] - 0.96).abs() < 1e-9, "{}", x[0]);
        assert_eq!(x[2], 1.5);
    }

    #[test]
    fn more_damping_less_yaw() {
        let p = SurrogateYawPlant::default();
        let run = |cm: f64| {
            let u = dvector![cm, 0.0, 0.0, 1.0];
            let mut x = DVector::zeros(3);
            for _ in 0..20000 {
                x = p.step(&x, &u, DT);
            }
            x[0].abs()
        };
        assert!(run(0.5) > run(1.0));
        assert!(run(1.0) > run(3.0));
    }

    #[test]
    fn hold_constant_is_slew_limited() {
        let limits = PatternLimits {
            min: -1.5,
            max: 1.5,
            slew_rate: Some(3.5),
        };
        let r = ConstantReference(0.0);
        let a = embedded_control_step(
            &ControlDynamicsPolicy::hold_constant(),
            1.5,
            0.0,
            0.0,
            &r,
            RateSamples {
                now: 0.0,
                prev: 0.0,
            },
            &limits,
            DT,
        );
        assert!((a - 0.0147).abs() < 1e-15);
    }

    struct Ramp;
    impl Reference for Ramp {
        fn value(&self, t: f64) -> f64 {
            t
        }
        fn amplitude(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn pi_feedforward_increments() {
        let limits = PatternLimits {
            min: -1.5,
            max: 1.5,
            slew_rate: Some(3.5),
        };
        let mut policy = ControlDynamicsPolicy::pi_feedforward(0.02);
        let flat = RateSamples {
            now: 2.0,
            prev: 2.0,
        };
        let a = embedded_control_step(
            &policy,
            0.9,
            0.3,
            1.0,
            &ConstantReference(4.0),
            flat,
            &limits,
            DT,
        );
        assert_eq!(a, 0.3);

        // reference rises 0.1 over one 0.1 s step
        policy.kff = 0.0;
        let a = embedded_control_step(&policy, 0.9, 0.3, 1.0, &Ramp, flat, &limits, 0.1);
        assert!((a - 0.45).abs() < 1e-12);
    }
}
