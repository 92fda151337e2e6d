//! Command-line entry points and the HTTP marker service for `otseg`.

pub mod args;
pub mod boundaries;
pub mod commands;
pub mod service;

use std::process::ExitCode;
use std::time::Duration;

use args::{Cli, Command};

/// Runs a parsed command line and maps failures to exit codes.
pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Autoregions(a) => commands::autoregions(a),
        Command::Markers(a) => commands::markers(a),
        Command::Dsc(a) => commands::dsc(a),
        Command::Bench(a) => commands::bench(a),
        Command::GenDisks(a) => commands::gen_disks(a),
        Command::Serve(a) => return serve(&a.bind, Duration::from_secs(a.idle_minutes * 60)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

fn serve(bind: &str, idle: Duration) -> ExitCode {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_IO);
        }
    };
    match runtime.block_on(service::serve(bind, idle)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::EXIT_IO)
        }
    }
}
