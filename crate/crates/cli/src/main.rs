//! `pencil-transit`: transition matrices of operator pencils from the command line.
//!
//! Exit codes: 0 success, 1 assumption violated, 2 usage or parse error,
//! 3 numerical failure.

mod commands;
mod json;
mod spec;

use clap::{Parser, Subcommand};
use commands::{OracleFlags, TransitionFlags};
use pencil_transit::ErrorKind;
use serde_json::Value;
use spec::ProblemSpec;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Errors of the front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] pencil_transit::Error),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Assumption(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Assumption(_) => 1,
            CliError::Io(..) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Assumption => 1,
                ErrorKind::Usage => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pencil-transit", version, about = "Nonadiabatic transition matrices for self-adjoint operator pencils")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crossing location, parameters and structural checks.
    Analyze {
        spec: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Canonical, general and renumbered transition matrices.
    Transition {
        spec: PathBuf,
        #[arg(long, default_value = "smooth", value_parser = ["smooth", "flux"])]
        numbering: String,
        #[arg(long, default_value = "canonical", value_parser = ["canonical", "general"])]
        modes: String,
        /// Reference points of the general modes, left and right of x0.
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"], allow_negative_numbers = true)]
        xref: Option<Vec<f64>>,
        #[arg(long)]
        hbar: Option<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Empirical transition matrices from direct integration.
    Oracle {
        spec: PathBuf,
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',')]
        hbar: Vec<f64>,
        /// Projection distance from x0.
        #[arg(long = "X0", alias = "x0")]
        x0: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Comparison table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for per-run trace CSVs.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Parabolic cylinder function D_nu along a ray, as CSV.
    Pcf {
        #[arg(long, allow_hyphen_values = true)]
        nu: String,
        #[arg(long, default_value = "-45deg", allow_hyphen_values = true)]
        ray: String,
        /// R or R0:R1.
        #[arg(long, default_value = "10")]
        range: String,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print an example spec file (graphene, lz, wave, schrodinger, polynomial).
    Example {
        name: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_json(path: Option<&Path>, v: &Value) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, json::render(v)).map_err(|e| CliError::Io(p.display().to_string(), e))?;
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(s) = std::env::var("PENCIL_TRANSIT_THREADS") else { return Ok(()) };
    let n: usize = s
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("PENCIL_TRANSIT_THREADS = '{s}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { spec, json } => {
            let s = ProblemSpec::load(&spec)?;
            let (report, ok) = commands::analyze(&s)?;
            write_json(json.as_deref(), &report)?;
            if !ok {
                return Err(CliError::Assumption("structural checks failed".into()));
            }
        }
        Command::Transition { spec, numbering, modes, xref, hbar, json } => {
            let s = ProblemSpec::load(&spec)?;
            let flags = TransitionFlags {
                flux_numbering: numbering == "flux",
                general: modes == "general",
                x_ref: xref.map(|v| (v[0], v[1])),
                hbar,
            };
            let report = commands::transition(&s, &flags)?;
            write_json(json.as_deref(), &report)?;
        }
        Command::Oracle { spec, hbar, x0, tol, json, csv, traces } => {
            let s = ProblemSpec::load(&spec)?;
            if let Some(h) = hbar.iter().find(|h| !(**h > 0.0)) {
                return Err(CliError::Usage(format!("--hbar value {h} is not positive")));
            }
            let flags = OracleFlags { hbar, x0, tol, csv, traces };
            let report = commands::oracle(&s, &flags)?;
            write_json(json.as_deref(), &report)?;
        }
        Command::Pcf { nu, ray, range, points, csv } => {
            let nu = commands::parse_nu(&nu)?;
            let ray = commands::parse_ray(&ray)?;
            let range = commands::parse_range(&range)?;
            match csv {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|e| CliError::Io(p.display().to_string(), e))?;
                    commands::pcf(nu, ray, range, points, std::io::BufWriter::new(f))?;
                }
                None => commands::pcf(nu, ray, range, points, std::io::stdout().lock())?,
            }
        }
        Command::Example { name, json } => {
            let v = commands::example(&name)?;
            match json {
                Some(p) => write_json(Some(&p), &v)?,
                None => print!("{}", json::render(&v)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
