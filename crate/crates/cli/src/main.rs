use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bellsense_cli::{execute, CliError, Format, Subcommand, THREADS_ENV};

/// Three-parameter entangled sensing simulations.
#[derive(Parser, Debug)]
#[command(name = "bellsense", version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML scenario file; the bundled default for the subcommand when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::config(format!("{THREADS_ENV}={raw} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(e.to_string()))
}

fn run(args: &Args) -> Result<(), CliError> {
    configure_threads()?;
    let text = execute(args.command, args.config.as_deref(), args.seed, args.format)?;
    match &args.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
