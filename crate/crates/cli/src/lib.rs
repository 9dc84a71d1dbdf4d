//! Command-line front end: flag and config handling, CSV/SVG output.

pub mod args;
mod commands;
pub mod config;
pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{CRITICAL_HEADER, EVOLVE_HEADER, FIG1_HEADER, FIG2_HEADER, FIG3_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{} already exists (pass --overwrite to replace it)", .0.display())]
    Exists(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] ramsey_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Usage(_) | CliError::Clap(_) => 2,
            _ => 1,
        }
    }
}

/// What a successful command printed and wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub stdout: String,
    pub written: Vec<PathBuf>,
}

/// Parses `argv` (program name first), merges `--config`, and runs the command.
pub fn execute<I, T>(argv: I) -> Result<Report, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = config::merge_config(argv.into_iter().map(Into::into).collect())?;
    let cli = args::Cli::try_parse_from(argv)?;
    log::debug!("running {}", cli.command.name());
    commands::run(&cli.command)
}

/// [`execute`] with output on stdout/stderr; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match execute(argv) {
        Ok(report) => {
            print!("{}", report.stdout);
            0
        }
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            if e.use_stderr() { 2 } else { 0 }
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            if code == 2 {
                eprintln!("run with --help for usage");
            }
            code
        }
    }
}
