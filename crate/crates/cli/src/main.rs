use std::process::ExitCode;

use clap::Parser;
use irst_cli::{commands, configure_threads, Cli};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse_from(std::iter::once("irst".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match configure_threads().and_then(|()| commands::run(cli.command, &args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irst: {e:#}");
            ExitCode::FAILURE
        }
    }
}
