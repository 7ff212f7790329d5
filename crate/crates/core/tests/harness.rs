use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;

use utc_core::controller::{run_closed_loop, step_count};
use utc_core::estimator::{estimate_inputs, estimation_config, RecordedTrajectory};
use utc_core::harness::{self, trace, Scenario};
use utc_core::noise::CouplingKind;
use utc_core::plants::{ControlDynamicsKind, SurrogateYawPlant};
use utc_core::reference::{ConstantReference, SineReference};
use utc_core::ut_math::max_asymmetry;
use utc_core::{UtcConfig, UtcError};

fn scenario_in(dir: &Path, name: &str, body: &str) -> Scenario {
    let text = format!(
        "scenario.name = {name}\noutput.dir = {}\n{body}\n",
        dir.display()
    );
    Scenario::parse(&text, name).unwrap()
}

#[test]
fn trace_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_in(dir.path(), "short", "sim.duration = 2.5");
    let outcome = harness::run_scenario(&s).unwrap();
    let rows = trace::read_trace(&outcome.dir.unwrap().join(harness::TRACE_FILE)).unwrap();
    assert_eq!(rows.len(), step_count(2.5, 0.0042) + 1);
    for (k, w) in rows.windows(2).enumerate() {
        assert_eq!(w[0].k, k);
        assert!(w[1].t > w[0].t);
    }
}

#[test]
fn thirty_second_run_has_7143_rows() {
    assert_eq!(step_count(30.0, 0.0042) + 1, 7143);
}

#[test]
fn metrics_from_file_equal_metrics_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "sim.duration = 4",
        "controller.kind = baseline_pose\nsim.duration = 4",
    ] {
        let s = scenario_in(dir.path(), "lossless", body);
        let outcome = harness::run_scenario(&s).unwrap();
        let rows = trace::read_trace(&outcome.dir.unwrap().join(harness::TRACE_FILE)).unwrap();
        assert_eq!(rows, outcome.run.rows);
        let from_file = harness::compute_metrics(&rows, 400f64.to_radians(), s.utc.dt, 0.0);
        assert!(from_file.same_values(&outcome.metrics));
    }
}

#[test]
fn output_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_in(dir.path(), "files", "sim.duration = 1");
    let out = harness::run_scenario(&s).unwrap().dir.unwrap();
    for f in [
        harness::TRACE_FILE,
        harness::TRAJECTORY_FILE,
        harness::METRICS_FILE,
        harness::PLOT_FILE,
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let svg = std::fs::read_to_string(out.join(harness::PLOT_FILE)).unwrap();
    assert!(svg.contains("yr_real") && svg.contains("u_alpha"));
}

#[test]
fn numerical_failure_leaves_partial_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_in(
        dir.path(),
        "broken",
        "plant.kind = linear\nutc.initial_cov = -1\nutc.qu = 0.1",
    );
    let err = harness::run_scenario(&s).unwrap_err();
    assert!(err.is_numerical(), "{err}");
    let out = s.scenario_dir();
    let rows = trace::read_trace(&out.join(harness::TRACE_FILE)).unwrap();
    assert!(rows.is_empty());
    let report = std::fs::read_to_string(out.join(harness::ERROR_FILE)).unwrap();
    assert!(report.contains("indefinite"), "{report}");
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "utc.w0 = 0.25\nnoise.coupling = reference_sign\n").unwrap();
    match Scenario::from_file(&path) {
        Err(UtcError::Config { key, .. }) => assert_eq!(key, "noise.coupling"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        Scenario::from_file(&dir.path().join("missing.cfg")),
        Err(UtcError::Io { .. })
    ));
}

#[test]
fn comparison_reproduces_the_failure_of_pose_only_control() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = [
        scenario_in(
            dir.path(),
            "baseline",
            "controller.kind = baseline_pose\nsim.duration = 15",
        ),
        scenario_in(dir.path(), "utc", "sim.duration = 15"),
    ];
    let cmp = harness::compare_scenarios(&scenarios, dir.path()).unwrap();
    assert!(cmp.outcomes[0].metrics.rms_fraction > 0.5);
    assert!(cmp.outcomes[1].metrics.rms_fraction < 0.1);
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("comparison.txt").is_file());
}

#[test]
fn comparison_rejects_colliding_names() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_in(dir.path(), "same", "sim.duration = 1");
    let err = harness::compare_scenarios(&[s.clone(), s], dir.path()).unwrap_err();
    assert!(matches!(err, UtcError::Config { ref key, .. } if key == "scenario.name"));
}

#[test]
fn long_run_keeps_covariance_symmetric_psd() {
    let plant = SurrogateYawPlant::default();
    let cfg = UtcConfig::yaw(
        ControlDynamicsKind::PiFeedforward,
        CouplingKind::ReferenceDerivativeSign,
    );
    // 10,500 steps
    let run = run_closed_loop(&plant, &SineReference::fast_turn(), &cfg, 44.1).unwrap();
    assert!(run.records.len() > 10_000);
    for r in &run.records {
        assert!(r.pu_min_eig >= 0.0);
        assert!(cfg.bounds.contains(&r.u_cmd));
    }
}

#[test]
fn zero_reference_keeps_the_plant_near_rest() {
    let plant = SurrogateYawPlant::default();
    let cfg = UtcConfig::yaw(
        ControlDynamicsKind::PiFeedforward,
        CouplingKind::ReferenceDerivativeSign,
    );
    let run = run_closed_loop(&plant, &ConstantReference(0.0), &cfg, 10.0).unwrap();
    let max_rate = run.rows.iter().map(|r| r.yr_real.abs()).fold(0.0, f64::max);
    assert!(max_rate <= 0.05, "{max_rate}");
}

/// Estimation config with the controller's short horizon; at 0.25 s the
/// surrogate's pattern channel is masked by drifting damping estimates.
fn short_horizon_estimation() -> UtcConfig {
    let cfg = UtcConfig::yaw(ControlDynamicsKind::HoldConstant, CouplingKind::None);
    let mut est = estimation_config(&cfg);
    est.horizon_steps = 5;
    est
}

#[test]
fn equilibrium_trajectory_estimates_zero_pattern() {
    let plant = SurrogateYawPlant::default();
    let cfg = short_horizon_estimation();
    let inputs = vec![DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0]); 2000];
    let traj = RecordedTrajectory::simulate(&plant, &inputs, cfg.dt);
    let est = estimate_inputs(&traj, &plant, &cfg).unwrap();
    // hand pressure is invisible without roll, so only alpha is checked
    for u in &est[est.len() / 4..] {
        assert!(u[3].abs() < 0.05, "{}", u.transpose());
    }
}

#[test]
fn sinusoidal_pattern_is_tracked() {
    let plant = SurrogateYawPlant::default();
    let cfg = short_horizon_estimation();
    let inputs: Vec<DVector<f64>> = (0..7143)
        .map(|k| {
            let t = k as f64 * cfg.dt;
            DVector::from_vec(vec![0.5, 0.0, 0.0, 0.8 * (2.0 * PI * 0.3 * t).sin()])
        })
        .collect();
    let traj = RecordedTrajectory::simulate(&plant, &inputs, cfg.dt);
    let est = estimate_inputs(&traj, &plant, &cfg).unwrap();
    let window: Vec<usize> = (0..est.len()).filter(|&k| traj.times[k] >= 2.0).collect();
    let a: Vec<f64> = window.iter().map(|&k| est[k][3]).collect();
    let b: Vec<f64> = window.iter().map(|&k| inputs[k][3]).collect();
    let r = pearson(&a, &b);
    assert!(r >= 0.95, "{r}");
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn estimation_from_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_in(
        dir.path(),
        "replay",
        "sim.duration = 2\nestimator.t_pred_steps = 5",
    );
    let out = harness::run_scenario(&s).unwrap();
    let traj = trace::read_trajectory(&out.dir.unwrap().join(harness::TRAJECTORY_FILE)).unwrap();
    assert_eq!(traj.len(), out.run.rows.len());
    let (est, path) = harness::run_estimate(&traj, &s).unwrap();
    assert_eq!(est.len(), traj.len() - 5);
    assert!(path.is_file());
    let too_short = RecordedTrajectory {
        times: traj.times[..3].to_vec(),
        outputs: traj.outputs[..3].to_vec(),
        states: traj.states[..3].to_vec(),
        dt: traj.dt,
    };
    assert!(matches!(
        harness::run_estimate(&too_short, &s),
        Err(UtcError::InputTooShort { .. })
    ));
}

#[test]
fn step_records_are_consistent() {
    let plant = SurrogateYawPlant::default();
    let cfg = UtcConfig::yaw(
        ControlDynamicsKind::HoldConstant,
        CouplingKind::ReferenceSign,
    );
    let run = run_closed_loop(&plant, &SineReference::fast_turn(), &cfg, 0.5).unwrap();
    for r in &run.records {
        assert_eq!(r.terminal_outputs.len(), 9);
        assert_eq!(max_asymmetry(&r.cy), 0.0);
        assert!(r.pu_trace <= r.pu_pred_trace + 1e-12);
    }
}
