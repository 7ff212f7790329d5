//! Process-noise schedule for the four-channel yaw control vector
//! `[damping coeff, k_right, k_left, alpha]`.
//!
//! The noise covariance encodes how the channels are expected to move
//! together: its damping/hand couplings follow the sign of the reference (or
//! of its rate), and the damping/pattern coupling follows a look-ahead sign
//! schedule so that damping rises before the commanded turn slows.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UtcError};
use crate::reference::{reference_rate, Reference};
use crate::ut_math::{psd_repair, ControlBelief};

/// Channel layout of the yaw control vector.
pub const DAMPING: usize = 0;
pub const K_RIGHT: usize = 1;
pub const K_LEFT: usize = 2;
pub const ALPHA: usize = 3;

const INITIAL_DIAG: [f64; 4] = [6.25, 0.01, 0.01, 0.01];
const INITIAL_DAMPING_HAND: f64 = 0.74;
const INITIAL_DAMPING_ALPHA: f64 = 0.56;

/// Ratio of process noise to initial covariance.
pub const QU_SCALE: f64 = 0.1;

/// `+1` for non-negative input, `-1` otherwise.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// How the damping/hand off-diagonals of the noise covariance are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    None,
    ReferenceSign,
    ReferenceDerivativeSign,
}

impl FromStr for CouplingKind {
    type Err = UtcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "reference_sign" => Ok(Self::ReferenceSign),
            "reference_derivative_sign" => Ok(Self::ReferenceDerivativeSign),
            other => Err(UtcError::config(
                "noise.kind",
                format!("unknown coupling policy `{other}`"),
            )),
        }
    }
}

impl CouplingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ReferenceSign => "reference_sign",
            Self::ReferenceDerivativeSign => "reference_derivative_sign",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCouplingPolicy {
    pub kind: CouplingKind,
    pub q12: f64,
    pub q13: f64,
}

impl NoiseCouplingPolicy {
    pub fn new(kind: CouplingKind, q12: f64, q13: f64) -> Result<Self> {
        for (key, v) in [("noise.q12", q12), ("noise.q13", q13)] {
            if !v.is_finite() || v < 0.0 {
                return Err(UtcError::config(
                    key,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(Self { kind, q12, q13 })
    }

    /// Coupling magnitudes equal to the scaled initial damping/hand covariance.
    pub fn with_default_gains(kind: CouplingKind) -> Self {
        Self {
            kind,
            q12: QU_SCALE * INITIAL_DAMPING_HAND,
            q13: QU_SCALE * INITIAL_DAMPING_HAND,
        }
    }
}

/// Sign of the damping/pattern covariance with look-ahead hysteresis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisState {
    pub s14: f64,
    pub k_hyst: usize,
}

impl HysteresisState {
    /// Starts at `-1` (reduce damping to start turning), look-ahead of ~1 s.
    pub fn new(dt: f64) -> Self {
        Self {
            s14: -1.0,
            k_hyst: ((1.0 / dt).round() as usize).max(1),
        }
    }

    /// Advance to step `k` and return the new sign.
    pub fn advance(&mut self, k: usize, reference: &dyn Reference, dt: f64) -> f64 {
        self.s14 = s14_schedule(k, reference, dt, self.k_hyst, self.s14);
        self.s14
    }
}

/// One step of the damping/pattern sign schedule.
///
/// With the previous sign positive the current change in `|yr_ref|` decides;
/// otherwise the change `k_hyst` steps ahead does.
pub fn s14_schedule(
    k: usize,
    reference: &dyn Reference,
    dt: f64,
    k_hyst: usize,
    prev_s14: f64,
) -> f64 {
    let mag = |step: usize| reference.value(step as f64 * dt).abs();
    if prev_s14 > 0.0 {
        -sign(mag(k + 1) - mag(k))
    } else {
        -sign(mag(k + k_hyst + 1) - mag(k + k_hyst))
    }
}

/// Initial covariance with explicit coupling signs, exactly as tabulated.
/// This matrix is indefinite for every sign choice; see [`initial_belief`].
pub fn initial_covariance_literal(s12: f64, s13: f64, s14: f64) -> DMatrix<f64> {
    let mut p = DMatrix::from_diagonal(&DVector::from_row_slice(&INITIAL_DIAG));
    set_pair(&mut p, DAMPING, K_RIGHT, s12 * INITIAL_DAMPING_HAND);
    set_pair(&mut p, DAMPING, K_LEFT, s13 * INITIAL_DAMPING_HAND);
    set_pair(&mut p, DAMPING, ALPHA, s14 * INITIAL_DAMPING_ALPHA);
    p
}

pub fn initial_mean() -> DVector<f64> {
    DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0])
}

/// Starting belief: damping 0.5, no hand input, neutral pose, with the
/// tabulated covariance (`s12 = s13 = +1`, `s14 = -1`) repaired to PSD.
pub fn initial_belief() -> ControlBelief {
    ControlBelief {
        mean: initial_mean(),
        covariance: psd_repair(&initial_covariance_literal(1.0, 1.0, -1.0)),
    }
}

/// Noise base: the tabulated initial covariance magnitudes times [`QU_SCALE`].
pub fn qu_base() -> DMatrix<f64> {
    initial_covariance_literal(1.0, 1.0, 1.0) * QU_SCALE
}

fn set_pair(p: &mut DMatrix<f64>, i: usize, j: usize, v: f64) {
    p[(i, j)] = v;
    p[(j, i)] = v;
}

/// Noise covariance with the coupling signs substituted, before repair.
pub fn build_qu_raw(
    policy: &NoiseCouplingPolicy,
    s14: f64,
    yr_ref: f64,
    yr_ref_rate: f64,
    base: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if base.shape() != (4, 4) {
        return Err(UtcError::Contract(format!(
            "coupling policies need the 4-channel layout, got {}x{}",
            base.nrows(),
            base.ncols()
        )));
    }
    let mut qu = base.clone();
    let (c12, c13) = match policy.kind {
        CouplingKind::None => (0.0, 0.0),
        CouplingKind::ReferenceSign => {
            let s = sign(yr_ref);
            (policy.q12 * s, -policy.q13 * s)
        }
        CouplingKind::ReferenceDerivativeSign => {
            let s = sign(yr_ref_rate);
            (policy.q12 * s, policy.q13 * s)
        }
    };
    set_pair(&mut qu, DAMPING, K_RIGHT, c12);
    set_pair(&mut qu, DAMPING, K_LEFT, c13);
    let mag = base[(DAMPING, ALPHA)].abs();
    set_pair(&mut qu, DAMPING, ALPHA, s14 * mag);
    Ok(qu)
}

pub fn build_qu(
    policy: &NoiseCouplingPolicy,
    s14: f64,
    yr_ref: f64,
    yr_ref_rate: f64,
    base: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(psd_repair(&build_qu_raw(
        policy,
        s14,
        yr_ref,
        yr_ref_rate,
        base,
    )?))
}

/// Time-varying noise: base matrix, coupling policy and hysteresis state.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub policy: NoiseCouplingPolicy,
    pub hysteresis: HysteresisState,
    pub base: DMatrix<f64>,
}

impl NoiseSchedule {
    pub fn new(policy: NoiseCouplingPolicy, dt: f64) -> Self {
        Self {
            policy,
            hysteresis: HysteresisState::new(dt),
            base: qu_base(),
        }
    }

    /// Advance the hysteresis to step `k` and build that step's noise.
    pub fn next(&mut self, k: usize, reference: &dyn Reference, dt: f64) -> Result<DMatrix<f64>> {
        let s14 = self.hysteresis.advance(k, reference, dt);
        let t = k as f64 * dt;
        build_qu(
            &self.policy,
            s14,
            reference.value(t),
            reference_rate(reference, t, dt),
            &self.base,
        )
    }
}
