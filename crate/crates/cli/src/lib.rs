//! Batch front-end for the `binlattice` simulation toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod presets;

pub use commands::{run, Outcome};
pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BINLATTICE_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))
}
