mod args;
mod commands;
mod envelope;
mod error;
mod options;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Input and configuration errors.
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Axioms(a) => commands::axioms(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Cauchy(a) => commands::cauchy(a),
        Command::Density(a) => commands::density(a),
        Command::Extract(a) => commands::extract(a),
        Command::Falsify(a) => commands::falsify_cmd(a),
        Command::TracePlot(a) => commands::trace_plot(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("gstat: {e}");
        ExitCode::from(EXIT_USAGE)
    })
}
