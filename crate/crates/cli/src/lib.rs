//! Configuration-driven experiment runner for the `gsmatrix` toolkit.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::RunError;
use config::{ExperimentConfig, Overrides};
use output::Sink;

#[derive(Parser, Debug)]
#[command(name = "gsmatrix", version, about = "Semiclassical scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration (overrides the defaults table).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Semiclassical parameter; repeat for a sweep.
    #[arg(long = "h", global = true)]
    pub h: Vec<f64>,
    /// Grid size: rows for scatmap, sphere points for smatrix, samples for
    /// farfield and resolve, solver nodes for oracle-compare and eigenfun.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Spatial dimension, 2 or 3.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dim: Option<u8>,
    /// Seed of the randomized inputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Scattering map over a line of impact parameters (CSV).
    Scatmap,
    /// Leading-order packet propagation.
    Propagate,
    /// Scattering matrix on the configured sphere Gaussian state.
    Smatrix,
    /// Outgoing and incoming far-field profiles (CSV).
    Farfield,
    /// Resolution of identity: c_h and reconstruction errors.
    Resolve,
    /// Grid solver against leading-order propagation (1D analogue).
    OracleCompare,
    /// Generalized eigenfunction residuals (1D analogue).
    Eigenfun,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scatmap => "scatmap",
            Command::Propagate => "propagate",
            Command::Smatrix => "smatrix",
            Command::Farfield => "farfield",
            Command::Resolve => "resolve",
            Command::OracleCompare => "oracle-compare",
            Command::Eigenfun => "eigenfun",
        }
    }
}

fn execute(cli: &Cli) -> Result<serde_json::Value, RunError> {
    let c = &cli.common;
    let overrides = Overrides { out: c.out.clone(), h: c.h.clone(), dim: c.dim.map(usize::from), seed: c.seed };
    let mut cfg = ExperimentConfig::load(c.config.as_deref(), &overrides)?;
    if let Some(n) = c.grid {
        match cli.command {
            Command::Scatmap => cfg.scatmap.rows = n,
            Command::Smatrix => cfg.smatrix.grid = n,
            Command::Farfield => cfg.farfield.samples = n,
            Command::Resolve => cfg.resolve.samples = n,
            Command::OracleCompare => cfg.oracle.n = n,
            Command::Eigenfun => cfg.eigenfun.n = n,
            Command::Propagate => {}
        }
    }
    let mut sink = Sink::new(&cfg.out);
    sink.write("config.toml", cfg.to_toml().as_bytes())?;
    match cli.command {
        Command::Scatmap => commands::scatmap(&cfg, &mut sink),
        Command::Propagate => commands::propagate_cmd(&cfg, &mut sink),
        Command::Smatrix => commands::smatrix(&cfg, &mut sink),
        Command::Farfield => commands::farfield(&cfg, &mut sink),
        Command::Resolve => commands::resolve(&cfg, &mut sink),
        Command::OracleCompare => commands::oracle_compare(&cfg, None, &mut sink),
        Command::Eigenfun => commands::eigenfun(&cfg, None, &mut sink),
    }
}

fn error_object(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": { "kind": kind, "message": message, "exit_code": code } }).to_string()
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 2 for invalid input, 3 for a domain failure such as a
/// trapped trajectory, 1 when outputs cannot be written.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", error_object("Usage", msg.trim(), 2));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(doc) => {
            println!("{}", json!({ "command": cli.command.name(), "config_hash": doc["config_hash"], "files": doc["files"] }));
            0
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", error_object(&e.kind(), &e.to_string(), code));
            code
        }
    }
}
