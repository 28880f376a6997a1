use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod manifest;

use args::{Cli, Command};

/// H0 not rejected by the primary test.
const EXIT_ACCEPT: u8 = 0;
const EXIT_ERROR: u8 = 1;
/// H0 rejected by the primary test.
const EXIT_REJECT: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors must not look like a rejection
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT });
        }
    };
    let seed = match args::effective_seed(cli.seed) {
        Ok(s) => s,
        Err(e) => return report_error(&e),
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, seed).map(|_| EXIT_ACCEPT),
        Command::Fit(a) => commands::fit(a).map(|_| EXIT_ACCEPT),
        Command::Validate(a) => commands::validate(a).map(|accepted| if accepted { EXIT_ACCEPT } else { EXIT_REJECT }),
        Command::Report(a) => commands::report(a).map(|_| EXIT_ACCEPT),
        Command::Batch(a) => commands::batch(a).map(|_| EXIT_ACCEPT),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &calvalid::Error) -> ExitCode {
    let body = serde_json::json!({ "error": { "code": e.code(), "message": e.to_string() } });
    eprintln!("{body}");
    ExitCode::from(EXIT_ERROR)
}
