//! Scalar reference signals.

use std::f64::consts::PI;

/// A scalar reference `yr_ref(t)`.
pub trait Reference: Send + Sync {
    fn value(&self, t: f64) -> f64;

    /// Analytic time derivative, when available.
    fn derivative(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Largest expected magnitude, used to scale error metrics.
    fn amplitude(&self) -> f64;
}

/// `offset + amplitude * sin(2 pi f t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineReference {
    pub amplitude: f64,
    pub frequency: f64,
    pub offset: f64,
}

impl SineReference {
    /// 400 deg/s peaks at 0.2 Hz.
    pub fn fast_turn() -> Self {
        Self {
            amplitude: 400.0 * PI / 180.0,
            frequency: 0.2,
            offset: 0.0,
        }
    }
}

impl Reference for SineReference {
    fn value(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * self.frequency * t).sin()
    }

    fn derivative(&self, t: f64) -> Option<f64> {
        let w = 2.0 * PI * self.frequency;
        Some(self.amplitude * w * (w * t).cos())
    }

    fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

/// `offset` before `step_time`, `offset + amplitude` from then on.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReference {
    pub amplitude: f64,
    pub offset: f64,
    pub step_time: f64,
}

impl Reference for StepReference {
    fn value(&self, t: f64) -> f64 {
        if t >= self.step_time {
            self.offset + self.amplitude
        } else {
            self.offset
        }
    }

    fn derivative(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn amplitude(&self) -> f64 {
        self.amplitude
            .abs()
            .max((self.offset + self.amplitude).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantReference(pub f64);

impl Reference for ConstantReference {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn derivative(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn amplitude(&self) -> f64 {
        self.0.abs()
    }
}

/// Uniformly sampled signal, held at the nearest sample and at its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledReference {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl SampledReference {
    fn index(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.samples.len().saturating_sub(1))
        }
    }
}

impl Reference for SampledReference {
    fn value(&self, t: f64) -> f64 {
        self.samples[self.index(t)]
    }

    fn amplitude(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Derivative of `r` at `t`: analytic if provided, else a one-step forward difference.
pub fn reference_rate(r: &dyn Reference, t: f64, dt: f64) -> f64 {
    r.derivative(t)
        .unwrap_or_else(|| (r.value(t + dt) - r.value(t)) / dt)
}
