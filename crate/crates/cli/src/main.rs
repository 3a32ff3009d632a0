use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shape_geodesics::io::{self, ExperimentOutcome};
use shape_geodesics::Error;

/// Geodesics of Sobolev-type metrics on immersed surfaces.
#[derive(Parser)]
#[command(name = "shape-geodesics", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the geodesic described by a configuration file.
    Run {
        config: PathBuf,
        /// Override a configuration value (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a named experiment: bump, image, spheres, zigzag, frechet-scaling or selfx.
    Experiment {
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SHAPE_GEODESICS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SHAPE_GEODESICS_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<ExperimentOutcome, Error> {
    match command {
        Command::Run { config, set } => {
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
                path: config.clone(),
                source,
            })?;
            let mut cfg = io::parse_config_with_overrides(&text, &set)?;
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            cfg.resolve_paths(&base);
            io::run_config(&cfg)
        }
        Command::Experiment { name, set } => {
            let cfg = io::parse_config_with_overrides("", &set)?;
            io::run_experiment(&name, &cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match execute(cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.report());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {} internal check(s) failed", outcome.checks.iter().filter(|c| !c.passed).count());
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
