//! File formats and subcommands of the `crpm` executable.

pub mod commands;
pub mod map_file;
pub mod model_file;

pub use commands::{run, Cli, CliError};
pub use map_file::{ClassMap, Palette};
pub use model_file::ModelFile;

/// Environment variable capping the worker count; `0` or unset uses every core.
pub const THREADS_ENV: &str = "CRPM_THREADS";

/// Configures the global worker pool from [`THREADS_ENV`].
pub fn init_threads() -> Result<usize, CliError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            CliError::new(
                commands::EXIT_USAGE,
                format!("{} must be a non-negative integer, got '{}'", THREADS_ENV, v),
            )
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(commands::EXIT_USAGE, e.to_string()))?;
    Ok(rayon::current_num_threads())
}
