//! Reproducible, file-emitting experiments for the pinned homopolymer.
//!
//! Each run writes a data file (CSV or JSON), a long-format plot file when
//! the experiment has a prediction to compare against, and a JSON sidecar
//! with the resolved configuration, units and definitions of every column,
//! the constants used, wall time and versions.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::time::Instant;

pub use config::{parse_args, BetaSpec, Cli, Command, Format, ParseOutcome, RunConfig, SamplerKind, OUTPUT_DIR_ENV};
pub use error::{CliError, Result};

/// Runs one configuration end to end and returns the sidecar path.
pub fn execute(config: &RunConfig) -> Result<std::path::PathBuf> {
    let start = Instant::now();
    let exp = experiments::run(config)?;
    output::write_artifacts(config, &exp, start.elapsed().as_secs_f64())
}

/// Process entry point: parses `args`, runs, reports and returns the exit
/// code (0 success, 1 invalid configuration, 2 failed diagnostic).
pub fn main_with<I, T>(args: I, env_output: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_args(args, env_output) {
        Ok(c) => c,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseOutcome::Cli(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&config) {
        Ok(sidecar) => {
            println!("{}", sidecar.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
