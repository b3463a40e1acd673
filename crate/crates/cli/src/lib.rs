//! `tabsim`: command-line harness for the TAB toolkit.
//!
//! Every command reads one configuration (a file, or the `ref_a` preset when
//! `--config` is omitted), runs its experiment and writes plot-ready CSV
//! plus a JSON report. Exit codes: 0 success, 1 configuration error,
//! 2 infeasible request, 3 numerical failure.

pub mod commands;
pub mod report;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use tab_core::config::Config;

#[derive(Debug, Parser)]
#[command(name = "tabsim", version, about = "Triple-active-bridge converter experiments")]
pub struct Cli {
    /// Configuration file (TOML). Defaults to the `ref_a` preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output file; reports are written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run sweep points concurrently.
    #[arg(long, global = true)]
    pub parallel: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its waveform trace.
    Simulate,
    /// Sweep one parameter and record steady output and port powers.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Solve bridge phases for a grid-port and load power target.
    SolveDispatch {
        /// Power delivered by port 1, watts.
        #[arg(long, allow_hyphen_values = true)]
        grid: f64,
        /// Power consumed at port 3, watts.
        #[arg(long, allow_hyphen_values = true)]
        load: f64,
    },
    /// Compare square-wave and SPWM harmonic content.
    ThdCompare,
    /// SPWM delivering bridges with a phase-shifted square consuming bridge.
    CombinedMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepKind {
    Duty,
    Phase,
    Ma,
    HalfbridgeDuty,
}

/// Error carrying the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<tab_core::Error> for CliError {
    fn from(e: tab_core::Error) -> Self {
        use tab_core::Error::*;
        let code = match e {
            InvalidConfig(_) | Precondition(_) => 1,
            Infeasible { .. } => 2,
            NonConvergent { .. } | SimulationDiverged { .. } | UndefinedThd => 3,
        };
        Self { code, message: e.to_string() }
    }
}

pub fn load_config(path: Option<&PathBuf>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::ref_a()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            Ok(Config::from_toml(&text)?)
        }
    }
}

/// Runs a parsed command line. Output that belongs on stdout (the dispatch
/// solution) is returned; diagnostics are the caller's to print.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = load_config(cli.config.as_ref())?;
    let out = || cli.out.clone().ok_or_else(|| CliError::config("--out is required for this command"));
    match &cli.command {
        Command::Simulate => commands::simulate(&config, &out()?),
        Command::Sweep { kind, from, to, steps } => {
            commands::sweep(&config, *kind, *from, *to, *steps, &out()?, cli.parallel)
        }
        Command::SolveDispatch { grid, load } => commands::solve_dispatch(&config, *grid, *load),
        Command::ThdCompare => commands::thd_compare(&config, &out()?),
        Command::CombinedMode => commands::combined_mode(&config, &out()?, cli.parallel),
    }
}

/// What a successful or partially successful command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub stdout: String,
    /// Non-fatal notes for the error stream.
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

/// Parses `args` and runs them, returning the exit code. Diagnostics go to
/// stderr, command output to stdout.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
