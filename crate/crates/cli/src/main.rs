use std::process::ExitCode;

use clap::Parser;
use ust_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match ust_cli::run(&cli) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
