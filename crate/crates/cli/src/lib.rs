//! `lcp` command-line runner: config loading, persistence and reporting
//! around the `lcp-core` drivers. All file I/O of the workspace lives here.

pub mod commands;
pub mod config_file;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{Cli, Command};
pub use error::{CliError, CliResult};

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
