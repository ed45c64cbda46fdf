//! Library behind the `bai` binary: argument definitions, commands, property
//! suites and the no-free-lunch demo.

pub mod args;
pub mod commands;
pub mod demo;
pub mod error;
pub mod format;
pub mod verify;

use std::io::Write;

pub use error::{exit, CliError, CliResult};

/// Runs a parsed command line, writing results to `out`. Returns the exit code.
pub fn run(cli: args::Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match commands::run(cli.command, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "bai: {e}");
            e.exit_code()
        }
    }
}
