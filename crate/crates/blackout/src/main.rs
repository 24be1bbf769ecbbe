use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = blackout::cli::Cli::parse();
    match blackout::cli::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
