//! Scenario files, the baseline controller, metrics and output files.

pub mod baseline;
pub mod config;
pub mod metrics;
pub mod svg;
pub mod trace;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::controller::{run_closed_loop, ClosedLoopRun, RunFailure};
use crate::error::{Result, UtcError};
use crate::estimator::{estimate_inputs, estimation_config, RecordedTrajectory};
use crate::plants::PlantModel;
use crate::reference::Reference;

pub use baseline::{baseline_pose_controller, run_baseline, BaselineParams};
pub use config::{ControllerKind, ReferenceSpec, Scenario, Thresholds};
pub use metrics::{compute_metrics, MetricsReport};

pub const TRACE_FILE: &str = "trace.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const PLOT_FILE: &str = "plot.svg";
pub const ERROR_FILE: &str = "error.txt";
pub const ESTIMATES_FILE: &str = "estimates.csv";

/// Result of a scenario run kept in memory.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub run: ClosedLoopRun,
    pub metrics: MetricsReport,
    /// Directory the output files went to, when they were written.
    pub dir: Option<PathBuf>,
}

/// Run the scenario's controller without writing anything.
pub fn simulate(s: &Scenario) -> std::result::Result<(ClosedLoopRun, f64), Box<RunFailure>> {
    let start = Instant::now();
    let run = match s.controller {
        ControllerKind::Utc => run_closed_loop(&s.plant, &s.reference, &s.utc, s.duration)?,
        ControllerKind::BaselinePose => {
            run_baseline(&s.plant, &s.reference, &s.baseline, s.utc.dt, s.duration).map_err(
                |error| {
                    Box::new(RunFailure {
                        partial: ClosedLoopRun::default(),
                        error,
                    })
                },
            )?
        }
    };
    Ok((run, start.elapsed().as_secs_f64()))
}

pub fn scenario_metrics(s: &Scenario, run: &ClosedLoopRun, wall_clock_s: f64) -> MetricsReport {
    compute_metrics(&run.rows, s.reference.amplitude(), s.utc.dt, wall_clock_s)
}

/// Plant trajectory of a run, suitable for replay through the estimator.
pub fn run_trajectory<P: PlantModel + ?Sized>(
    plant: &P,
    run: &ClosedLoopRun,
    dt: f64,
) -> Result<RecordedTrajectory> {
    RecordedTrajectory::new(
        run.rows.iter().map(|r| r.t).collect(),
        run.states.iter().map(|x| plant.output(x)).collect(),
        run.states.clone(),
        dt,
    )
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| UtcError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| UtcError::io(path, e))
}

/// Run a scenario and write its trace, trajectory, metrics and plot into
/// `<output dir>/<name>/`. A failed run still writes the partial trace and
/// an error report before returning the error.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutcome> {
    let dir = s.scenario_dir();
    create_dir(&dir)?;
    let _ = std::fs::remove_file(dir.join(ERROR_FILE));
    match simulate(s) {
        Ok((run, wall)) => {
            let metrics = scenario_metrics(s, &run, wall);
            trace::write_trace(&dir.join(TRACE_FILE), &run.rows)?;
            trace::write_trajectory(
                &dir.join(TRAJECTORY_FILE),
                &run_trajectory(&s.plant, &run, s.utc.dt)?,
            )?;
            write_file(&dir.join(METRICS_FILE), &metrics.to_string())?;
            write_file(
                &dir.join(PLOT_FILE),
                &svg::render_trace_svg(&run.rows, &s.name),
            )?;
            Ok(ScenarioOutcome {
                name: s.name.clone(),
                run,
                metrics,
                dir: Some(dir),
            })
        }
        Err(failure) => {
            let RunFailure { partial, error } = *failure;
            trace::write_trace(&dir.join(TRACE_FILE), &partial.rows)?;
            let report = format!(
                "scenario {} failed after {} steps\n{error}\n",
                s.name,
                partial.rows.len()
            );
            write_file(&dir.join(ERROR_FILE), &report)?;
            Err(error)
        }
    }
}

/// Parse and run a scenario file.
pub fn run_scenario_file(path: &Path) -> Result<ScenarioOutcome> {
    run_scenario(&Scenario::from_file(path)?)
}

/// Thresholds the metrics violate, as readable messages.
pub fn threshold_failures(metrics: &MetricsReport, t: &Thresholds) -> Vec<String> {
    let mut failures = Vec::new();
    if let Some(max) = t.max_rms_fraction {
        if !(metrics.rms_fraction <= max) {
            failures.push(format!(
                "rms_fraction {} exceeds {max}",
                metrics.rms_fraction
            ));
        }
    }
    if let Some(max) = t.max_convergence_time {
        match metrics.convergence_time {
            Some(ct) if ct <= max => {}
            Some(ct) => failures.push(format!("convergence_time {ct} exceeds {max}")),
            None => failures.push(format!("did not converge (limit {max} s)")),
        }
    }
    failures
}

/// Side-by-side metrics of several scenarios.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub outcomes: Vec<ScenarioOutcome>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,rms_error,rms_fraction,max_abs_error,convergence_time,effort_0,effort_1,effort_2,effort_3,wall_clock_s\n",
        );
        for o in &self.outcomes {
            let m = &o.metrics;
            let _ = write!(
                out,
                "{},{},{},{},{}",
                o.name,
                m.rms_error,
                m.rms_fraction,
                m.max_abs_error,
                m.convergence_time
                    .map(|t| t.to_string())
                    .unwrap_or_default()
            );
            for j in 0..4 {
                out.push(',');
                if let Some(e) = m.control_effort.get(j) {
                    let _ = write!(out, "{e}");
                }
            }
            let _ = writeln!(out, ",{}", m.wall_clock_s);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .outcomes
            .iter()
            .map(|o| o.name.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut out = format!(
            "{:<width$}  {:>10}  {:>9}  {:>10}  {:>11}  {:>8}\n",
            "scenario", "rms_error", "rms/amp", "max_error", "converged", "wall_s"
        );
        for o in &self.outcomes {
            let m = &o.metrics;
            let conv = m
                .convergence_time
                .map(|t| format!("{t:.3} s"))
                .unwrap_or_else(|| "no".into());
            let _ = writeln!(
                out,
                "{:<width$}  {:>10.5}  {:>9.4}  {:>10.5}  {:>11}  {:>8.3}",
                o.name, m.rms_error, m.rms_fraction, m.max_abs_error, conv, m.wall_clock_s
            );
        }
        out
    }
}

/// Run scenarios in parallel, each writing its own files, and write the
/// comparison table to `out_dir/comparison.{txt,csv}`.
pub fn compare_scenarios(scenarios: &[Scenario], out_dir: &Path) -> Result<Comparison> {
    if scenarios.len() < 2 {
        return Err(UtcError::Contract(
            "comparison needs at least two scenarios".into(),
        ));
    }
    for (i, s) in scenarios.iter().enumerate() {
        if scenarios[..i]
            .iter()
            .any(|o| o.scenario_dir() == s.scenario_dir())
        {
            return Err(UtcError::config(
                "scenario.name",
                format!("`{}` appears twice; output files would collide", s.name),
            ));
        }
    }
    let results: Vec<Result<ScenarioOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run_scenario(s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    let cmp = Comparison { outcomes };
    create_dir(out_dir)?;
    write_file(&out_dir.join("comparison.txt"), &cmp.to_table())?;
    write_file(&out_dir.join("comparison.csv"), &cmp.to_csv())?;
    Ok(cmp)
}

/// Estimation config of a scenario: its controller settings with the
/// estimation horizon (`estimator.t_pred_steps`, else 0.25 s).
pub fn scenario_estimation_config(s: &Scenario) -> crate::controller::UtcConfig {
    let mut cfg = estimation_config(&s.utc);
    if let Some(n) = s.estimator_horizon {
        cfg.horizon_steps = n;
    }
    cfg
}

/// Estimate the inputs behind a recorded trajectory and write them to
/// `<output dir>/<name>/estimates.csv`.
pub fn run_estimate(
    traj: &RecordedTrajectory,
    s: &Scenario,
) -> Result<(Vec<nalgebra::DVector<f64>>, PathBuf)> {
    let cfg = scenario_estimation_config(s);
    let estimates = estimate_inputs(traj, &s.plant, &cfg)?;
    let dir = s.scenario_dir();
    create_dir(&dir)?;
    let path = dir.join(ESTIMATES_FILE);
    write_file(&path, &trace::write_estimates_string(&estimates, traj.dt))?;
    Ok((estimates, path))
}
