//! Box bounds, slew-rate limits and the boundary reflection used to keep
//! sigma points from collapsing onto a saturated mean.

use nalgebra::DVector;

use crate::error::{Result, UtcError};

/// A mean element closer than this to a bound counts as sitting on it.
pub const ON_BOUND_TOLERANCE: f64 = 1e-9;

/// Per-element actuation limits.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBounds {
    pub min: DVector<f64>,
    pub max: DVector<f64>,
    /// Max |dU/dt| per element, in element units per second.
    pub slew_rate: Vec<Option<f64>>,
}

impl ControlBounds {
    pub fn new(min: DVector<f64>, max: DVector<f64>, slew_rate: Vec<Option<f64>>) -> Result<Self> {
        if min.len() != max.len() || slew_rate.len() != min.len() {
            return Err(UtcError::Contract(format!(
                "bounds lengths differ: min {}, max {}, slew {}",
                min.len(),
                max.len(),
                slew_rate.len()
            )));
        }
        for j in 0..min.len() {
            if !(min[j] < max[j]) {
                return Err(UtcError::Contract(format!(
                    "bound {j}: min {} is not below max {}",
                    min[j], max[j]
                )));
            }
            if let Some(rate) = slew_rate[j] {
                if !(rate > 0.0) {
                    return Err(UtcError::Contract(format!(
                        "bound {j}: slew rate {rate} must be positive"
                    )));
                }
            }
        }
        Ok(Self {
            min,
            max,
            slew_rate,
        })
    }

    /// Actuator limits of the four-channel yaw control vector
    /// `[damping coeff, k_right, k_left, alpha]`, with alpha slewing at 3.5 rad/s.
    pub fn yaw_default() -> Self {
        Self {
            min: DVector::from_vec(vec![0.01, 0.0, 0.0, -1.5]),
            max: DVector::from_vec(vec![6.0, 5.0, 5.0, 1.5]),
            slew_rate: vec![None, None, None, Some(3.5)],
        }
    }

    /// Box without slew limits.
    pub fn unlimited_rate(min: DVector<f64>, max: DVector<f64>) -> Result<Self> {
        let n = min.len();
        Self::new(min, max, vec![None; n])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn range(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        u.iter()
            .enumerate()
            .all(|(j, &v)| v >= self.min[j] && v <= self.max[j])
    }
}

pub fn clamp(u: &DVector<f64>, bounds: &ControlBounds) -> DVector<f64> {
    DVector::from_iterator(
        u.len(),
        u.iter()
            .enumerate()
            .map(|(j, &v)| v.clamp(bounds.min[j], bounds.max[j])),
    )
}

/// Mirror an out-of-box sigma point element back inside when the mean is
/// saturated at that same bound, then clamp.
pub fn reflect_collapsed(
    ui: &DVector<f64>,
    mean: &DVector<f64>,
    bounds: &ControlBounds,
) -> DVector<f64> {
    let mut out = ui.clone();
    for j in 0..ui.len() {
        let lo = bounds.min[j];
        let hi = bounds.max[j];
        let on_min = (mean[j] - lo).abs() <= ON_BOUND_TOLERANCE;
        let on_max = (mean[j] - hi).abs() <= ON_BOUND_TOLERANCE;
        if (on_min && ui[j] < lo) || (on_max && ui[j] > hi) {
            out[j] = 1.5 * mean[j] - 0.5 * ui[j];
        }
    }
    clamp(&out, bounds)
}

/// Move from `prev` toward `cmd` by at most `rate * dt`.
pub fn slew_limit(prev: f64, cmd: f64, rate: f64, dt: f64) -> f64 {
    let step = rate * dt;
    if (cmd - prev).abs() <= step {
        cmd
    } else {
        prev + step.copysign(cmd - prev)
    }
}

/// Apply every configured per-element slew limit against `prev`.
pub fn slew_limit_vector(
    prev: &DVector<f64>,
    cmd: &DVector<f64>,
    bounds: &ControlBounds,
    dt: f64,
) -> DVector<f64> {
    let mut out = cmd.clone();
    for (j, rate) in bounds.slew_rate.iter().enumerate() {
        if let Some(rate) = rate {
            out[j] = slew_limit(prev[j], cmd[j], *rate, dt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn clamp_examples() {
        let b = ControlBounds::yaw_default();
        let u0 = dvector![0.5, 0.0, 0.0, 0.0];
        assert_eq!(clamp(&u0, &b), u0);
        assert_eq!(
            clamp(&dvector![-1.0, 6.0, -2.0, 2.0], &b),
            dvector![0.01, 5.0, 0.0, 1.5]
        );
    }

    #[test]
    fn reflect_at_max() {
        let b = ControlBounds::yaw_default();
        let mean = dvector![1.0, 1.0, 1.0, 1.5];
        let ui = dvector![1.0, 1.0, 1.0, 1.8];
        let r = reflect_collapsed(&ui, &mean, &b);
        assert!((r[3] - 1.35).abs() < 1e-15);
    }

    #[test]
    fn reflect_at_min() {
        let b = ControlBounds::yaw_default();
        let mean = dvector![0.01, 1.0, 1.0, 0.0];
        let ui = dvector![-0.4, 1.0, 1.0, 0.0];
        let r = reflect_collapsed(&ui, &mean, &b);
        assert!((r[0] - 0.215).abs() < 1e-15);
    }

    #[test]
    fn interior_mean_only_clamps() {
        let b = ControlBounds::yaw_default();
        let mean = dvector![1.0, 1.0, 1.0, 0.0];
        let ui = dvector![7.0, -1.0, 2.0, 1.0];
        assert_eq!(
            reflect_collapsed(&ui, &mean, &b),
            dvector![6.0, 0.0, 2.0, 1.0]
        );
    }

    #[test]
    fn large_reflection_is_reclamped() {
        let b = ControlBounds::yaw_default();
        let mean = dvector![1.0, 1.0, 1.0, -1.5];
        let ui = dvector![1.0, 1.0, 1.0, -10.0];
        // 1.5 * -1.5 + 5 = 2.75 leaves the box
        assert_eq!(reflect_collapsed(&ui, &mean, &b)[3], 1.5);
    }

    #[test]
    fn slew_examples() {
        assert!((slew_limit(0.0, 1.5, 3.5, 0.0042) - 0.0147).abs() < 1e-15);
        assert_eq!(slew_limit(0.2, 0.21, 3.5, 0.0042), 0.21);
        assert_eq!(slew_limit(0.3, 0.3, 3.5, 0.0042), 0.3);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ControlBounds::new(dvector![1.0], dvector![1.0], vec![None]).is_err());
        assert!(ControlBounds::new(dvector![0.0], dvector![1.0], vec![Some(0.0)]).is_err());
        assert!(ControlBounds::new(dvector![0.0], dvector![1.0, 2.0], vec![None]).is_err());
    }
}
