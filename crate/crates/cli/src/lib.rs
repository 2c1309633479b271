//! Batch experiment runner for the load-balancing diffusion approximation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::fmt;
use std::io::Write;

pub mod commands;
pub mod config;
pub mod table;

pub use commands::Command;
pub use config::{ExperimentConfig, OutputFormat, Overrides, RawConfig};
pub use table::{Cell, Table};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<diffapprox::Error> for CliError {
    fn from(e: diffapprox::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Runs `command` and renders its table in the configured format.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let table = command.run(cfg)?;
    Ok(table.render(cfg.format, command.name(), cfg.master_seed, &cfg.digest()))
}

/// Writes rendered output to the configured file, or to stdout.
pub fn emit(cfg: &ExperimentConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
