use std::fmt;

use crate::controller::TraceRow;

/// Start of the steady-state window, s.
pub const STEADY_STATE_START: f64 = 2.0;

/// Error band, as a fraction of the reference amplitude, that defines convergence.
pub const CONVERGENCE_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// RMS of `yr_real - yr_ref` over the steady-state window.
    pub rms_error: f64,
    /// `rms_error` divided by the reference amplitude.
    pub rms_fraction: f64,
    pub max_abs_error: f64,
    /// First time after which the error stays inside the convergence band;
    /// `None` when the run ends outside it.
    pub convergence_time: Option<f64>,
    /// Sum of `|dU| * dt` for each control element.
    pub control_effort: Vec<f64>,
    pub wall_clock_s: f64,
    pub steps: usize,
    pub amplitude: f64,
}

/// Metrics of a trace sampled every `dt` against a reference of the given
/// amplitude. A zero amplitude scales the convergence band by 1 instead.
pub fn compute_metrics(
    rows: &[TraceRow],
    amplitude: f64,
    dt: f64,
    wall_clock_s: f64,
) -> MetricsReport {
    let err = |r: &TraceRow| r.yr_real - r.yr_ref;

    let mut window: Vec<f64> = rows
        .iter()
        .filter(|r| r.t >= STEADY_STATE_START)
        .map(|r| err(r).powi(2))
        .collect();
    if window.is_empty() {
        window = rows.iter().map(|r| err(r).powi(2)).collect();
    }
    let rms_error = if window.is_empty() {
        0.0
    } else {
        (window.iter().sum::<f64>() / window.len() as f64).sqrt()
    };

    let max_abs_error = rows.iter().map(|r| err(r).abs()).fold(0.0, f64::max);

    let scale = if amplitude > 0.0 { amplitude } else { 1.0 };
    let band = CONVERGENCE_BAND * scale;
    let convergence_time = match rows.iter().rposition(|r| err(r).abs() >= band) {
        None => rows.first().map(|r| r.t),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].t),
        Some(_) => None,
    };

    let m = rows.first().map(|r| r.u.len()).unwrap_or(0);
    let mut control_effort = vec![0.0; m];
    for w in rows.windows(2) {
        for (j, effort) in control_effort.iter_mut().enumerate() {
            *effort += (w[1].u[j] - w[0].u[j]).abs() * dt;
        }
    }

    MetricsReport {
        rms_error,
        rms_fraction: rms_error / scale,
        max_abs_error,
        convergence_time,
        control_effort,
        wall_clock_s,
        steps: rows.len(),
        amplitude,
    }
}

impl MetricsReport {
    /// Same metrics ignoring wall-clock time.
    pub fn same_values(&self, other: &MetricsReport) -> bool {
        self.rms_error == other.rms_error
            && self.max_abs_error == other.max_abs_error
            && self.convergence_time == other.convergence_time
            && self.control_effort == other.control_effort
            && self.steps == other.steps
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rms_error = {}", self.rms_error)?;
        writeln!(f, "rms_fraction = {}", self.rms_fraction)?;
        writeln!(f, "max_abs_error = {}", self.max_abs_error)?;
        match self.convergence_time {
            Some(t) => writeln!(f, "convergence_time = {t}")?,
            None => writeln!(f, "convergence_time = did not converge")?,
        }
        let effort: Vec<String> = self.control_effort.iter().map(|v| v.to_string()).collect();
        writeln!(f, "control_effort = {}", effort.join(", "))?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "wall_clock_s = {}", self.wall_clock_s)
    }
}
