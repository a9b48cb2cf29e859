//! Command-line front end for `gradflow`: single runs, correction comparisons
//! and convergence studies driven by a flat key=value config.

pub mod commands;
pub mod config;

pub use config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid setup: {0}")]
    Setup(gradflow::Error),

    #[error("solver failure at step {step}: {source}")]
    Solver { step: usize, source: gradflow::Error },

    #[error("output error: {0}")]
    Output(gradflow::Error),
}

impl CliError {
    /// Process exit status: 1 for configuration and I/O problems, 2 for
    /// failures while integrating.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver { .. } => 2,
            _ => 1,
        }
    }

    /// Classifies a library error raised outside the time loop.
    pub fn from_setup(err: gradflow::Error) -> Self {
        use gradflow::Error as E;
        match err {
            E::Io(_) => CliError::Output(err),
            E::InvalidGrid(_) | E::GridMismatch | E::SymbolLayout { .. } | E::InvalidScheme(_) => CliError::Setup(err),
            E::NonFinite { step } => CliError::Solver { step, source: err },
            other => CliError::Solver { step: 0, source: other },
        }
    }
}
