//! Command-line front end for `fbm-sfde`.
//!
//! Exit codes: 0 when every check passed and every output was written,
//! 1 when a check failed or a computation errored, 2 for usage errors and
//! 3 for I/O errors.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::Parser;

pub mod checks;
pub mod commands;
pub mod config;

pub use config::{parse_config, parse_config_text, Cli, Command, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Compute(fbm_sfde::Error),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) | CliError::Compute(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fbm_sfde::Error> for CliError {
    fn from(e: fbm_sfde::Error) -> Self {
        CliError::Compute(e)
    }
}

/// Creates `path` (truncating) and hands a buffered writer to `body`.
pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Parses, validates, echoes the resolved config into the output directory
/// and runs the subcommand on a pool of the requested size.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
    write_file(&config::config_path(&cfg.out), |w| w.write_all(cfg.echo().as_bytes()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
    pool.install(|| match cfg.command {
        Command::Paths => commands::paths(cfg),
        Command::Convergence => commands::convergence(cfg),
        Command::CheckOperators => commands::check_operators(cfg),
        Command::CheckConditions => commands::check_conditions(cfg),
    })
}

/// Full entry point; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
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
    match parse_config(&cli).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e {
                CliError::Usage(_) => "usage error",
                CliError::Io(_) => "I/O error",
                CliError::Compute(_) => "error",
                CliError::Failed(_) => "check failed",
            };
            eprintln!("fbm-sfde: {kind}: {e}");
            e.exit_code()
        }
    }
}
