//! Scenario files, presets, parameter sweeps and invariant suites behind
//! the `crossdiff` command.

pub mod output;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use output::{run_scenario, Check, RunSummary};
pub use scenario::{Scenario, PRESET_NAMES};
pub use sweep::{sweep, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] crossdiff::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `1e−10 · (1 + sup)`, the allowed undershoot below zero.
pub fn positivity_tolerance(sup: f64) -> f64 {
    1e-10 * (1.0 + sup)
}

/// Largest acceptable W-reduction residual.
pub const REDUCTION_TOLERANCE: f64 = 1e-12;
