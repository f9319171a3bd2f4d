use std::process::ExitCode;

use clap::Parser;
use grainmodel_cli::args::Cli;

fn main() -> ExitCode {
    match grainmodel_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
