mod args;
mod commands;
mod config;
mod error;
mod expr;
mod io;
mod manifest;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::RunInfo;
use error::CliError;

/// Every argument of the chosen subcommand with its resolved value, in
/// declaration order.
fn resolved_options(cmd: &clap::Command, m: &clap::ArgMatches) -> Vec<(String, String)> {
    cmd.get_arguments()
        .filter_map(|a| {
            let id = a.get_id().as_str();
            let raw = m.try_get_raw(id).ok()??;
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            Some((id.to_string(), vals.join(",")))
        })
        .filter(|(k, _)| k != "config")
        .collect()
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let (argv, config) = config::expand(argv)?;
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => Ok(()),
                _ => Err(CliError::Usage(String::new())),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let root = Cli::command();
    let options = matches
        .subcommand()
        .and_then(|(name, m)| root.find_subcommand(name).map(|c| resolved_options(c, m)))
        .unwrap_or_default();
    let info = RunInfo { options, config };
    match &cli.command {
        Command::Generate(c) => commands::generate(c, &info),
        Command::Fit(c) => commands::fit(c, &info),
        Command::Cov(c) => commands::cov(c, &info),
        Command::Simulate(c) => commands::simulate_cmd(c, &info),
        Command::Bench(c) => commands::bench(c, &info),
        Command::Sweep(c) => commands::sweep(c, &info),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
