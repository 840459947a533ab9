use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gdprox_cli::config::Config;
use gdprox_cli::{exit_code, run_experiment, CliError, Experiment};

#[derive(Parser, Debug)]
#[command(
    name = "gdprox",
    version,
    about = "Trajectory-proximity experiments for unprojected gradient descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, env = "GDPROX_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Distance of sample GD to population GD, stability contrast.
    Proximity,
    /// Linear and nonsmooth lower-bound constructions.
    Lowerbound,
    /// Grid-optimized origin-centred guarantee and its population-centred counterpart.
    Gn,
    /// Excess-risk rate and clipped high-probability quantiles.
    Generalize,
    /// Power-law fit of one CSV column against another.
    Rates,
}

fn run(cli: &Cli) -> Result<gdprox_cli::RunOutcome, CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let experiment = match cli.command {
        Command::Proximity => Experiment::Proximity,
        Command::Lowerbound => Experiment::Lowerbound,
        Command::Gn => Experiment::Gn,
        Command::Generalize => Experiment::Generalize,
        Command::Rates => Experiment::Rates,
    };
    if let Some(s) = cli.seed {
        if experiment == Experiment::Rates {
            return Err(CliError::Config("rates takes no seed".into()));
        }
        cfg.set("seed", s);
    }
    run_experiment(experiment, &mut cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(o) => {
            for line in &o.checks {
                println!("{line}");
            }
            println!("wrote {}", cli.out.join("manifest.txt").display());
        }
        Err(e) => eprintln!("gdprox: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
