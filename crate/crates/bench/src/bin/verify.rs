//! Standalone entry point for the oracle check suite.

use std::process::ExitCode;

use clap::Parser;
use varmuon_bench::{dispatch, Cli, Command, VerifyArgs};

#[derive(Parser)]
#[command(name = "verify", version, about = "Run the varmuon oracle check suite")]
struct VerifyCli {
    #[command(flatten)]
    args: VerifyArgs,
}

fn main() -> ExitCode {
    let v = VerifyCli::parse();
    dispatch(Cli {
        command: Command::Verify(v.args),
    })
}
