use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use utc_core::harness::{self, trace, Scenario};
use utc_core::UtcError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_THRESHOLD: u8 = 4;

#[derive(Parser)]
#[command(
    name = "utc",
    version,
    about = "Unscented transform controller scenarios"
)]
struct Cli {
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Simulated duration in seconds, overrides `sim.duration`.
    #[arg(long, global = true)]
    duration: Option<f64>,

    /// Run every scenario twice and require byte-identical traces.
    #[arg(long, global = true)]
    seedless_check: bool,

    /// Fail with exit code 4 when a scenario misses its `assert.*` thresholds.
    #[arg(long, global = true)]
    assert_metrics: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, metrics and plot.
    Run { config: PathBuf },
    /// Run several scenarios in parallel and tabulate their metrics.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
    },
    /// Estimate the inputs that explain a recorded trajectory.
    Estimate {
        trajectory: PathBuf,
        config: PathBuf,
    },
}

enum Failure {
    Error(UtcError),
    Threshold(String),
}

impl From<UtcError> for Failure {
    fn from(e: UtcError) -> Self {
        Failure::Error(e)
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, Failure> {
    let mut s = Scenario::from_file(path)?;
    if let Some(dir) = &cli.out_dir {
        s.output_dir = dir.clone();
    }
    if let Some(d) = cli.duration {
        if !(d > 0.0 && d.is_finite()) {
            return Err(
                UtcError::config("sim.duration", format!("must be positive, got {d}")).into(),
            );
        }
        s.duration = d;
    }
    Ok(s)
}

fn seedless_check(s: &Scenario, first: &harness::ScenarioOutcome) -> Result<(), Failure> {
    let (again, _) = harness::simulate(s).map_err(|f| Failure::Error(f.error))?;
    let a = trace::write_trace_string(&first.run.rows)?;
    let b = trace::write_trace_string(&again.rows)?;
    if a != b {
        return Err(Failure::Threshold(format!(
            "{}: repeated run produced a different trace",
            s.name
        )));
    }
    println!(
        "{}: seedless check passed ({} bytes identical)",
        s.name,
        a.len()
    );
    Ok(())
}

fn check_thresholds(cli: &Cli, s: &Scenario, o: &harness::ScenarioOutcome) -> Result<(), Failure> {
    if !cli.assert_metrics {
        return Ok(());
    }
    let failures = harness::threshold_failures(&o.metrics, &s.thresholds);
    if failures.is_empty() {
        println!("{}: metric thresholds met", s.name);
        Ok(())
    } else {
        Err(Failure::Threshold(format!(
            "{}: {}",
            s.name,
            failures.join("; ")
        )))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let s = load(cli, config)?;
            let outcome = harness::run_scenario(&s)?;
            print!("{}", outcome.metrics);
            if let Some(dir) = &outcome.dir {
                println!("outputs in {}", dir.display());
            }
            if cli.seedless_check {
                seedless_check(&s, &outcome)?;
            }
            check_thresholds(cli, &s, &outcome)
        }
        Command::Compare { configs } => {
            let scenarios = configs
                .iter()
                .map(|p| load(cli, p))
                .collect::<Result<Vec<_>, _>>()?;
            let out_dir = cli
                .out_dir
                .clone()
                .unwrap_or_else(|| scenarios[0].output_dir.clone());
            let cmp = harness::compare_scenarios(&scenarios, &out_dir)?;
            print!("{}", cmp.to_table());
            let mut failures = Vec::new();
            for (s, o) in scenarios.iter().zip(&cmp.outcomes) {
                if cli.seedless_check {
                    if let Err(f) = seedless_check(s, o) {
                        failures.push(f);
                    }
                }
                if let Err(f) = check_thresholds(cli, s, o) {
                    failures.push(f);
                }
            }
            match failures.into_iter().next() {
                Some(f) => Err(f),
                None => Ok(()),
            }
        }
        Command::Estimate { trajectory, config } => {
            let s = load(cli, config)?;
            let traj = trace::read_trajectory(trajectory)?;
            let (estimates, path) = harness::run_estimate(&traj, &s)?;
            println!(
                "{} estimates written to {}",
                estimates.len(),
                path.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(msg)) => {
            eprintln!("threshold failure: {msg}");
            ExitCode::from(EXIT_THRESHOLD)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}
