//! Library side of the `cci` binary, so commands can be driven from tests.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use args::{CacheCommand, Cli, Command};
use config::ExperimentConfig;
use error::{CliError, Outcome};

/// Runs a parsed command line and returns its exit code.
pub fn run(cli: &Cli) -> u8 {
    match dispatch(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let config = ExperimentConfig::resolve(&cli.overrides)?;
    let out = cli.overrides.out.as_deref();
    match &cli.command {
        Command::Score(args) => Ok(commands::score(&config, args, out)?.outcome()),
        Command::Evaluate(args) => commands::evaluate(args, out).map(|_| Outcome::Success),
        Command::Stratify(args) => commands::stratify(args, out).map(|_| Outcome::Success),
        Command::Generate(args) => commands::generate(&config, args, out).map(|_| Outcome::Success),
        Command::Cache {
            command: CacheCommand::Inspect,
        } => commands::cache_inspect(&config, out).map(|_| Outcome::Success),
    }
}
