use std::process::ExitCode;

use clap::Parser;
use varmuon_bench::{dispatch, Cli};

fn main() -> ExitCode {
    dispatch(Cli::parse())
}
