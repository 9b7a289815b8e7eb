//! Command-line front end for the `bellsense` simulations.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;
pub mod units;

pub use commands::{run_scenario, Subcommand};
pub use config::ConfigDocument;
pub use error::CliError;
pub use table::{parse_csv, Format, Table};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "BELLSENSE_THREADS";

/// Loads the configuration (bundled default when `path` is `None`), runs
/// the subcommand and renders its table.
pub fn execute(
    cmd: Subcommand,
    path: Option<&std::path::Path>,
    seed: u64,
    format: Format,
) -> Result<String, CliError> {
    let text = match path {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?
        }
        None => cmd.default_config().to_string(),
    };
    let config = ConfigDocument::parse(&text)?;
    run_scenario(cmd, &config, seed)?.render(format)
}
