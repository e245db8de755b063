//! Experiment runner and oracle suite behind the `np-spectra` binary.

pub mod config;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod svg;
pub mod verify;

pub use config::{load, parse, ExperimentConfig, LoadedConfig};
pub use error::{CliError, Result, EXIT_CRITERION_FAILED};
pub use runner::{run, RunOptions, RunOutcome};
pub use verify::{verify, Fault, VerifyOptions, VerifyReport};

/// Applies `NP_SPECTRA_THREADS` (0 or unset means one thread per core).
pub fn apply_thread_env(value: Option<&str>) -> Result<()> {
    let threads = match value.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("NP_SPECTRA_THREADS must be a non-negative integer, got {v:?}")))?,
    };
    np_spectra_core::set_thread_limit(threads);
    Ok(())
}
