//! Command-line driver for `friedrichs-core`: model files, command
//! dispatch and CSV / JSON-lines output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::commands::{Context, Overrides};
use crate::error::CliError;
use crate::output::Sink;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Resonances,
    Trajectory,
    Smatrix,
    Gamov,
    Laurent,
    Verify,
    Project,
}

#[derive(Debug, Parser)]
#[command(name = "friedrichs", version, about = "Resonances and scattering of the half-line Friedrichs model")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Model file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Write output files here instead of printing to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Search rectangle `re_min,re_max,im_min,im_max`.
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Coupling values for `trajectory`, comma separated.
    #[arg(long)]
    pub eps_grid: Option<String>,
    /// Energy grid `start:stop:count` for `smatrix`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Newton tolerance for resonance refinement.
    #[arg(long)]
    pub tol: Option<f64>,
}

fn floats(s: &str, sep: char, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(sep)
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {x:?} in {what}"))))
        .collect()
}

pub fn parse_region(s: &str) -> Result<[f64; 4], CliError> {
    let v = floats(s, ',', "--region")?;
    <[f64; 4]>::try_from(v).map_err(|_| CliError::Usage("--region needs four numbers".into()))
}

pub fn parse_lambda(s: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage("--lambda needs start:stop:count".into()));
    }
    let start = floats(parts[0], ',', "--lambda")?[0];
    let stop = floats(parts[1], ',', "--lambda")?[0];
    let count = parts[2].trim().parse::<usize>().map_err(|_| CliError::Usage("bad count in --lambda".into()))?;
    if !(start > 0.0 && stop >= start) || count == 0 {
        return Err(CliError::Usage("--lambda needs 0 < start <= stop and count >= 1".into()));
    }
    Ok((start, stop, count))
}

/// Worker count from `FRIEDRICHS_THREADS` (0 or unset: rayon's default).
fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("FRIEDRICHS_THREADS") {
        let n: usize =
            v.trim().parse().map_err(|_| CliError::Usage(format!("FRIEDRICHS_THREADS={v:?} is not a count")))?;
        if n > 0 {
            // a second initialization in the same process is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    Ok(())
}

fn run(cli: &Cli, hash: &mut Option<String>) -> Result<(), CliError> {
    configure_threads()?;
    let over = Overrides {
        region: cli.region.as_deref().map(parse_region).transpose()?,
        eps_grid: cli.eps_grid.as_deref().map(|s| floats(s, ',', "--eps-grid")).transpose()?,
        lambda: cli.lambda.as_deref().map(parse_lambda).transpose()?,
        tol: cli.tol,
    };
    let cfg = config::load(&cli.config)?;
    *hash = Some(cfg.hash.clone());
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let sink = Sink::new(cli.out.clone())?;
    let ctx = Context { cfg: &cfg, over: &over, sink: &sink };
    if cli.command == Command::Validate {
        return commands::validate(&ctx);
    }
    let (lines, passed) = commands::validation_records(&ctx);
    if !passed {
        for l in &lines {
            eprintln!("{l}");
        }
        return Err(CliError::Validation(commands::failed_items(&cfg.spec)));
    }
    match cli.command {
        Command::Validate => unreachable!(),
        Command::Resonances => commands::resonances(&ctx),
        Command::Trajectory => commands::trajectory(&ctx),
        Command::Smatrix => commands::smatrix(&ctx),
        Command::Gamov => commands::gamov_cmd(&ctx),
        Command::Laurent => commands::laurent(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Project => commands::project(&ctx),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut hash = None;
    match run(&cli, &mut hash) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.record(hash.as_deref()));
            e.exit_code()
        }
    }
}
