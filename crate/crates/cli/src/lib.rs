//! Command-line harness: dataset generation and labeling, GNN training,
//! inference, train-and-test sweeps, timing comparisons and a synthetic
//! structural-monitoring pipeline.

pub mod algorithms;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod shm;
pub mod synth;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::error::{CliError, EXIT_OK};
use crate::manifest::RunManifest;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    match try_run(argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn try_run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            return Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    match cli.command {
        Command::Replay(r) => {
            let m = RunManifest::load(&r.manifest)?;
            if m.command == "replay" || m.args.first().map(String::as_str) != Some(m.command.as_str()) {
                return Err(CliError::Data(format!("{}: not a replayable manifest", r.manifest.display())));
            }
            let mut replay_argv = vec![argv[0].clone()];
            replay_argv.extend(m.args);
            try_run(replay_argv)
        }
        cmd => commands::dispatch(cmd, &argv[1..]),
    }
}
