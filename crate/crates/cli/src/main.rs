use std::process::ExitCode;

use attncausal_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for f in &report.failures {
                eprintln!("error: {f}");
            }
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} item(s) failed", report.failures.len());
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
