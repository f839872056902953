//! Experiment driver library behind the `tubal-solve` binary: flat
//! `key=value` configs expanded into grids, seeded runs, CSV emission.

pub mod config;
pub mod driver;

use std::path::PathBuf;

pub use config::{Config, ConfigError, GridPoint};
pub use driver::{CliError, SweepOutput, Task};

/// Parsed command line for the fixed grammar
/// `tubal-solve <synth|recover|complete|sweep|trip-probe> --config <file>
/// [--out <dir>] [--workers N] [--aggregate]`.
#[derive(Debug)]
pub struct CliArgs {
    pub command: String,
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
    pub aggregate: bool,
}

pub const USAGE: &str = "usage: tubal-solve <synth|recover|complete|sweep|trip-probe> \
--config <file> [--out <dir>] [--workers N] [--aggregate]";

pub fn parse_args<I: IntoIterator<Item = String>>(args: I) -> Result<CliArgs, CliError> {
    let mut it = args.into_iter();
    let command = it
        .next()
        .ok_or_else(|| CliError::Config(format!("missing command\n{USAGE}")))?;
    if !matches!(
        command.as_str(),
        "synth" | "recover" | "complete" | "sweep" | "trip-probe"
    ) {
        return Err(CliError::Config(format!(
            "unknown command '{command}'\n{USAGE}"
        )));
    }
    let mut config: Option<PathBuf> = None;
    let mut out = PathBuf::from(".");
    let mut workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut aggregate = false;
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config("--config needs a value".into()))?;
                config = Some(PathBuf::from(v));
            }
            "--out" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config("--out needs a value".into()))?;
                out = PathBuf::from(v);
            }
            "--workers" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config("--workers needs a value".into()))?;
                workers = v
                    .parse()
                    .map_err(|_| CliError::Config("--workers must be a positive integer".into()))?;
                if workers == 0 {
                    return Err(CliError::Config("--workers must be a positive integer".into()));
                }
            }
            "--aggregate" => aggregate = true,
            other => {
                return Err(CliError::Config(format!("unknown flag '{other}'\n{USAGE}")));
            }
        }
    }
    let config = config.ok_or_else(|| CliError::Config(format!("--config is required\n{USAGE}")))?;
    Ok(CliArgs {
        command,
        config,
        out,
        workers,
        aggregate,
    })
}

/// Runs a parsed command; returns the process exit code.
pub fn run(args: &CliArgs) -> i32 {
    match run_inner(args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run_inner(args: &CliArgs) -> Result<Vec<PathBuf>, CliError> {
    let config_text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let config = Config::parse(&config_text)?;
    let task = match args.command.as_str() {
        "sweep" => Task::parse(config.scalar_or("task", "recover")?)?,
        other => Task::parse(other)?,
    };
    match task {
        Task::Synth => driver::cmd_synth(&config, &args.out),
        Task::Recover => {
            let out = driver::cmd_recover(&config, args.workers, args.aggregate)?;
            driver::write_sweep_outputs(&args.out, "recover", &out, &config_text)
        }
        Task::Complete => {
            let out = driver::cmd_complete(&config, args.workers, args.aggregate)?;
            driver::write_sweep_outputs(&args.out, "complete", &out, &config_text)
        }
        Task::TripProbe => {
            let csv = driver::cmd_trip_probe(&config)?;
            let out = SweepOutput {
                csv,
                aggregate_csv: None,
                trace_csv: None,
                errors: Vec::new(),
            };
            driver::write_sweep_outputs(&args.out, "trip_probe", &out, &config_text)
        }
    }
}
