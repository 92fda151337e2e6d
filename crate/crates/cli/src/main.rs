use std::process::ExitCode;

use clap::Parser;
use otseg_cli::args::Cli;

fn main() -> ExitCode {
    otseg_cli::run(Cli::parse())
}
