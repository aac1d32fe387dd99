//! CLI failures and their exit codes.

use std::io::IsTerminal;

use sppsband::{FloquetError, HypError, ModelError, SppsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Tolerance(String),
    #[error("{source}")]
    Truncation { source: SppsError },
    #[error("exact solution failed at x = {x}, K² = {k2}: {source}")]
    Oracle { x: f64, k2: f64, source: HypError },
    #[error("{0}")]
    Engine(sppsband::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) | CliError::Engine(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Truncation { .. } => 3,
            CliError::Oracle { .. } => 4,
        }
    }

    pub fn hint(&self) -> Option<String> {
        match self {
            CliError::Truncation {
                source: SppsError::Truncation { suggested_depth, .. },
            } => Some(format!(
                "rerun with --spps-terms {suggested_depth} or a K² window closer to the band-edge seed energy"
            )),
            _ => None,
        }
    }

    /// Writes the error and any hint to stderr, coloured unless `NO_COLOR` is set.
    pub fn report(&self) {
        let colour = std::env::var_os("NO_COLOR").is_none() && std::io::stderr().is_terminal();
        let label = if colour { "\x1b[1;31merror\x1b[0m" } else { "error" };
        eprintln!("{label}: {self}");
        if let Some(h) = self.hint() {
            let label = if colour { "\x1b[1;36mhint\x1b[0m" } else { "hint" };
            eprintln!("{label}: {h}");
        }
    }
}

fn classify_spps(e: SppsError) -> CliError {
    match e {
        SppsError::Truncation { .. } => CliError::Truncation { source: e },
        SppsError::InvalidIntervals(_) | SppsError::InvalidDepth => CliError::Usage(e.to_string()),
        SppsError::Model(m) => classify_model(m),
        other => CliError::Engine(other.into()),
    }
}

fn classify_model(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidParams(_) => CliError::Usage(e.to_string()),
        other => CliError::Engine(other.into()),
    }
}

impl From<SppsError> for CliError {
    fn from(e: SppsError) -> Self {
        classify_spps(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        classify_model(e)
    }
}

impl From<FloquetError> for CliError {
    fn from(e: FloquetError) -> Self {
        match e {
            FloquetError::Spps(s) => classify_spps(s),
            FloquetError::Model(m) => classify_model(m),
            FloquetError::WindowExcludesCenter { .. } | FloquetError::InvalidWindow { .. } => {
                CliError::Usage(e.to_string())
            }
            FloquetError::DegenerateEdge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Engine(other.into()),
        }
    }
}
