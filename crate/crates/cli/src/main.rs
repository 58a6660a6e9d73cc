mod args;
mod commands;
mod error;
mod setup;
mod svg;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let start = Instant::now();
    match commands::run(cli.command) {
        Ok(()) => {
            eprintln!("finished in {:.2}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
