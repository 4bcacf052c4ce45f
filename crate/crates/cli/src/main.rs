use std::path::PathBuf;
use std::process::ExitCode;

use blockade_core::error::Error;
use blockade_core::experiment::{run, write_outputs, ExperimentConfig};
use clap::{Parser, Subcommand};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_OTHER: u8 = 1;

/// Steady-state, dynamics and phase-space experiments for a qubit coupled
/// to two resonators.
#[derive(Parser)]
#[command(name = "blockade-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its result plus manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output path, overriding `output.path` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Points per sweep axis, overriding both sweep counts.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::InvalidParameter(_)
        | Error::InvalidArgument(_)
        | Error::InvalidDimension(_)
        | Error::ConstraintViolation { .. } => EXIT_VALIDATION,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

fn report(e: &Error) -> ExitCode {
    match e {
        Error::Validation(list) => {
            eprintln!("error: configuration invalid");
            for item in list {
                eprintln!("  - {item}");
            }
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(e))
}

fn load(path: &PathBuf, points: Option<usize>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let (Some(n), Some(axes)) = (points, cfg.numerics.sweep.as_mut()) {
        axes.delta_plus.count = n;
        axes.theta_drive.count = n;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config, None).and_then(|c| c.validate()) {
            Ok(warnings) => {
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        },
        Command::Run { config, jobs, out, points } => {
            let cfg = match load(&config, points) {
                Ok(c) => c,
                Err(e) => return report(&e),
            };
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if jobs == 0 {
                return report(&Error::Validation(vec!["--jobs must be at least 1".into()]));
            }
            let result = run(&cfg, jobs).and_then(|r| {
                let path = out.unwrap_or_else(|| cfg.output.path.clone());
                let manifest = write_outputs(&cfg, &r, &path)?;
                Ok((r, path, manifest))
            });
            match result {
                Ok((r, path, manifest)) => {
                    println!("wrote {} and {}", path.display(), manifest.display());
                    if !r.warnings.is_empty() {
                        println!("{} warning(s) recorded in the manifest", r.warnings.len());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
    }
}
