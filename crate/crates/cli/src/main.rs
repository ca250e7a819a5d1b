//! `csfair` command-line tool: train, sweep, evaluate, verify and generate
//! synthetic data.

mod args;
mod commands;
mod error;
mod prepare;
mod record;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Verify(a) => commands::verify::run(a),
        Command::GenSynth(a) => commands::gen_synth::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
