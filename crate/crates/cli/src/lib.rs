//! Command line and HTTP front end for uncertainty tube generation.

pub mod cli;
pub mod commands;
pub mod query;
pub mod registry;
pub mod service;

use clap::Parser;

pub use query::{run_query, QueryError, RunOptions, TubeQuery};
pub use registry::Registry;

/// Parses `argv` and runs the command. Usage errors exit with 2, failures with 1.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match cli::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        cli::Command::GenData(a) => commands::gen_data(a),
        cli::Command::Train(a) => commands::train_cmd(a),
        cli::Command::Uq(a) => commands::uq_cmd(a),
        cli::Command::Tube(a) => commands::tube_cmd(a),
        cli::Command::Serve(a) => commands::serve_cmd(a),
        cli::Command::Bench(a) => commands::bench_cmd(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
