//! Command-line harness around `gdprox`: config parsing, experiment
//! dispatch, CSV output and run manifests.

use std::path::Path;
use std::time::Instant;

pub mod commands;
pub mod config;
pub mod manifest;

use config::Config;
use manifest::{Manifest, OutputDir};

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("numeric fault: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<gdprox::Error> for CliError {
    fn from(e: gdprox::Error) -> Self {
        match e {
            gdprox::Error::NumericFault { .. } => CliError::Numeric(e.to_string()),
            gdprox::Error::EventNotMet(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// The experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Proximity,
    Lowerbound,
    Gn,
    Generalize,
    Rates,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Proximity => "proximity",
            Experiment::Lowerbound => "lowerbound",
            Experiment::Gn => "gn",
            Experiment::Generalize => "generalize",
            Experiment::Rates => "rates",
        }
    }

    /// Claim recorded in the manifest.
    pub fn claim(self) -> &'static str {
        match self {
            Experiment::Proximity => {
                "sample GD stays within 4 eta L (t+1)/sqrt(n) + 4 eta L sqrt(t+1) of population GD in expectation, and within 6 eta L (t+1)/sqrt(n) sqrt(log(T/delta)) + 4 eta L sqrt(t+1) with probability 1 - delta"
            }
            Experiment::Lowerbound => {
                "the distance to any sample-independent sequence is Omega(eta L t/sqrt(n) + eta L sqrt(t)) with constant probability"
            }
            Experiment::Gn => "the origin-centred guarantee G(n) scales as L/n^(1/4), the population-centred one faster",
            Experiment::Generalize => {
                "excess population risk decays like 1/sqrt(n) with eta = 1/(L sqrt(n)), T = n, and the clipped output obeys the high-probability bound"
            }
            Experiment::Rates => "power-law exponent of a measured quantity",
        }
    }

    fn run(self, cfg: &mut Config, out: &mut OutputDir) -> Result<commands::Checks, CliError> {
        match self {
            Experiment::Proximity => commands::proximity(cfg, out),
            Experiment::Lowerbound => commands::lowerbound(cfg, out),
            Experiment::Gn => commands::gn(cfg, out),
            Experiment::Generalize => commands::generalize(cfg, out),
            Experiment::Rates => commands::rates(cfg, out),
        }
    }
}

/// Summary of a finished run.
#[derive(Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub checks: Vec<String>,
}

/// Runs one experiment and writes its manifest. Checks that fail produce an
/// `Ok` outcome with `passed == false`; configuration and numeric problems
/// are errors.
pub fn run_experiment(
    experiment: Experiment,
    cfg: &mut Config,
    out_dir: &Path,
) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir)?;
    let checks = experiment.run(cfg, &mut out)?;
    let manifest = Manifest {
        experiment: experiment.name(),
        claim: experiment.claim(),
        config: cfg.resolved(),
        passed: checks.passed(),
        checks: checks.lines(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out)?;
    Ok(RunOutcome {
        passed: checks.passed(),
        checks: checks.lines().to_vec(),
    })
}

/// Exit code for a run result: 0 pass, 2 config, 3 invariant, 4 numeric.
pub fn exit_code(result: &Result<RunOutcome, CliError>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 3,
        Err(e) => e.exit_code(),
    }
}
