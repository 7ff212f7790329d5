//! Acceptance checks. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use utc_core::controller::{run_closed_loop, ClosedLoopRun};
use utc_core::estimator::{estimate_inputs, estimation_config, RecordedTrajectory};
use utc_core::harness::{self, trace, ControllerKind, Scenario};
use utc_core::noise::{CouplingKind, ALPHA};
use utc_core::plants::{ControlDynamicsKind, LinearPlant, SurrogateYawPlant};
use utc_core::reference::{ConstantReference, Reference, SineReference};
use utc_core::ut_math::{generate_sigma_points, ControlBelief};
use utc_core::UtcConfig;

const DURATION: f64 = 30.0;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, pass: bool, detail: String) -> Verdict {
    Verdict { id, pass, detail }
}

fn rms_fraction(run: &ClosedLoopRun, amplitude: f64) -> f64 {
    harness::compute_metrics(&run.rows, amplitude, 0.0042, 0.0).rms_fraction
}

fn pi_config() -> UtcConfig {
    UtcConfig::yaw(
        ControlDynamicsKind::PiFeedforward,
        CouplingKind::ReferenceDerivativeSign,
    )
}

fn hold_config() -> UtcConfig {
    UtcConfig::yaw(
        ControlDynamicsKind::HoldConstant,
        CouplingKind::ReferenceDerivativeSign,
    )
}

fn moment_matching() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    let mut worst_cov: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=8);
        let rank = rng.random_range(1..=m);
        let a = DMatrix::from_fn(m, rank, |_, _| rng.random_range(-2.0..2.0));
        let cov = &a * a.transpose();
        let mean = DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0));
        let w0 = rng.random_range(0.0..=0.9);
        let belief = ControlBelief::new(mean.clone(), cov.clone()).expect("belief");
        let set = generate_sigma_points(&belief, w0).expect("sigma points");
        let mu = set.weighted_mean(&set.points).expect("mean");
        let p = set
            .weighted_covariance(&set.points, &mu, &DMatrix::zeros(m, m))
            .expect("covariance");
        worst_cov = worst_cov.max((&p - &cov).norm() / cov.norm());
        worst_mean = worst_mean.max((&mu - &mean).norm() / (mean.norm() + cov.norm().sqrt()));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_cov <= 1e-10 && worst_mean <= 1e-10 && secs < 5.0;
    verdict(
        1,
        pass,
        format!(
            "1000 beliefs: max relative covariance error {worst_cov:.2e}, mean error {worst_mean:.2e} (tol 1e-10), {secs:.3} s (limit 5 s)"
        ),
    )
}

fn constraints(run: &ClosedLoopRun, cfg: &UtcConfig) -> Verdict {
    let inside = run
        .records
        .iter()
        .filter(|r| cfg.bounds.contains(&r.u_cmd))
        .count();
    let max_step = run
        .records
        .windows(2)
        .map(|w| (w[1].u_cmd[ALPHA] - w[0].u_cmd[ALPHA]).abs())
        .fold(0.0, f64::max);
    let limit = 3.5 * cfg.dt + 1e-12;
    verdict(
        2,
        inside == run.records.len() && max_step <= limit,
        format!(
            "{}/{} commands inside bounds, max alpha step {max_step:.17} (limit {limit:.17})",
            inside,
            run.records.len()
        ),
    )
}

fn psd(run: &ClosedLoopRun) -> Verdict {
    let post = run
        .records
        .iter()
        .map(|r| r.pu_min_eig)
        .fold(f64::INFINITY, f64::min);
    let pre = run
        .records
        .iter()
        .map(|r| r.pu_min_eig_pre_repair)
        .fold(f64::INFINITY, f64::min);
    let violation = (-pre).max(0.0);
    verdict(
        3,
        post >= 0.0 && violation <= 1e-8,
        format!(
            "min eigenvalue after repair {post:.3e} (>= 0), worst pre-repair violation {violation:.3e} (limit 1e-8) over {} steps",
            run.records.len()
        ),
    )
}

fn convergence() -> Verdict {
    let plant = LinearPlant::default();
    let r = ConstantReference(1.0);
    let run = match run_closed_loop(&plant, &r, &UtcConfig::linear(), 5.0) {
        Ok(run) => run,
        Err(f) => return verdict(4, false, format!("run failed: {}", f.error)),
    };
    let last_out = run
        .rows
        .iter()
        .rposition(|row| (row.yr_real - 1.0).abs() >= 0.02);
    let settle = match last_out {
        None => 0.0,
        Some(i) if i + 1 < run.rows.len() => run.rows[i + 1].t,
        Some(_) => f64::INFINITY,
    };
    verdict(
        4,
        settle <= 2.5,
        format!("linear plant, r = 1: |error| < 2% from t = {settle:.4} s on (limit 2.5 s)"),
    )
}

fn comparative(pi: f64, baseline: f64) -> Verdict {
    let ratio = baseline / pi;
    verdict(
        5,
        baseline > 0.5 && pi < 0.1 && ratio >= 5.0,
        format!(
            "baseline rms/amp {baseline:.4} (> 0.5), UTC rms/amp {pi:.4} (< 0.1), improvement {ratio:.2}x (>= 5x)"
        ),
    )
}

fn horizon_reduction(pi: f64, hold: f64) -> Verdict {
    verdict(
        6,
        pi <= 1.1 * hold,
        format!(
            "PI at 5 steps rms/amp {pi:.4} vs hold at 20 steps {hold:.4} (limit {:.4})",
            1.1 * hold
        ),
    )
}

fn round_trip(run: &ClosedLoopRun, cfg: &UtcConfig) -> Verdict {
    let plant = SurrogateYawPlant::default();
    let inputs: Vec<DVector<f64>> = run.records.iter().map(|r| r.u_cmd.clone()).collect();
    let traj = RecordedTrajectory::simulate(&plant, &inputs, cfg.dt);
    // the controller's own 5-step horizon
    let mut est_cfg = estimation_config(cfg);
    est_cfg.horizon_steps = cfg.horizon_steps;
    let estimates = match estimate_inputs(&traj, &plant, &est_cfg) {
        Ok(e) => e,
        Err(e) => return verdict(7, false, format!("estimation failed: {e}")),
    };
    let window: Vec<usize> = (0..estimates.len())
        .filter(|&k| traj.times[k] >= 2.0)
        .collect();
    let names = ["damping", "k_right", "k_left", "alpha"];
    let mut parts = Vec::new();
    let mut pass = true;
    for (j, name) in names.iter().enumerate() {
        let mse = window
            .iter()
            .map(|&k| (estimates[k][j] - inputs[k][j]).powi(2))
            .sum::<f64>()
            / window.len() as f64;
        let frac = mse.sqrt() / cfg.bounds.range(j);
        pass &= frac <= 0.10;
        parts.push(format!("{name} {frac:.4}"));
    }
    verdict(
        7,
        pass,
        format!(
            "per-element rms / range over t in [2, 30] s: {} (limit 0.10 each)",
            parts.join(", ")
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let setups = [
        (
            "utc_pi",
            "utc.policy = pi_feedforward\nutc.t_pred_steps = 5",
        ),
        (
            "utc_hold",
            "utc.policy = hold_constant\nutc.t_pred_steps = 20",
        ),
        ("baseline", "controller.kind = baseline_pose"),
        (
            "linear",
            "plant.kind = linear\nreference.kind = constant\nsim.duration = 5",
        ),
    ];
    let mut identical = 0;
    let mut bytes = 0;
    for (name, body) in setups {
        let mut files = Vec::new();
        for pass in 0..2 {
            let text = format!(
                "scenario.name = {name}\noutput.dir = {}\n{body}\n",
                dir.path().join(format!("pass{pass}")).display()
            );
            let s = Scenario::parse(&text, name).expect("scenario");
            let outcome = harness::run_scenario(&s).expect("run");
            let path = outcome.dir.expect("dir").join(harness::TRACE_FILE);
            files.push(std::fs::read(path).expect("trace"));
        }
        if files[0] == files[1] {
            identical += 1;
            bytes += files[0].len();
        }
    }
    verdict(
        8,
        identical == setups.len(),
        format!(
            "{identical}/{} scenarios wrote byte-identical trace files on two runs ({bytes} bytes compared)",
            setups.len()
        ),
    )
}

fn performance(secs: f64) -> Verdict {
    verdict(
        9,
        secs < 10.0,
        format!(
            "fast-turn UTC run, 9 sigma points x 5 steps x 7143 steps: {secs:.3} s (limit 10 s)"
        ),
    )
}

fn main() {
    let plant = SurrogateYawPlant::default();
    let reference = SineReference::fast_turn();
    let amp = reference.amplitude();

    let pi_cfg = pi_config();
    let start = Instant::now();
    let pi_run = run_closed_loop(&plant, &reference, &pi_cfg, DURATION).expect("PI run");
    let pi_secs = start.elapsed().as_secs_f64();
    let hold_run = run_closed_loop(&plant, &reference, &hold_config(), DURATION).expect("hold run");

    let baseline_scenario =
        Scenario::parse("controller.kind = baseline_pose", "baseline").expect("scenario");
    assert_eq!(baseline_scenario.controller, ControllerKind::BaselinePose);
    let (baseline_run, _) = harness::simulate(&baseline_scenario).expect("baseline run");

    let pi = rms_fraction(&pi_run, amp);
    let hold = rms_fraction(&hold_run, amp);
    let baseline = rms_fraction(&baseline_run, amp);

    // the trace file must reproduce the in-memory metrics exactly
    let reread = trace::parse_trace(&trace::write_trace_string(&pi_run.rows).expect("trace"))
        .expect("parse");
    assert_eq!(
        rms_fraction(
            &ClosedLoopRun {
                rows: reread,
                ..Default::default()
            },
            amp
        ),
        pi
    );

    let verdicts = [
        moment_matching(),
        constraints(&pi_run, &pi_cfg),
        psd(&pi_run),
        convergence(),
        comparative(pi, baseline),
        horizon_reduction(pi, hold),
        round_trip(&pi_run, &pi_cfg),
        determinism(),
        performance(pi_secs),
    ];

    let mut failed = 0;
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {}", v.id, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
