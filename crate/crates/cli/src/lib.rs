//! Command-line driver and HTTP API for the expert-finding engine.

pub mod args;
pub mod commands;
pub mod http;

use std::io::Write;

use clap::Parser;
use expertfind_core::error::Result;

use crate::args::{load_config, split_overrides, Cli};

/// Parses `argv` (program name first), applies config overrides and runs
/// the command. Clap handles `--help` and usage errors itself.
pub fn run(argv: Vec<String>, out: &mut dyn Write) -> Result<()> {
    let (rest, overrides) = split_overrides(argv)?;
    let cli = Cli::parse_from(rest);
    let config = load_config(cli.config.as_deref(), &overrides)?;
    commands::execute(cli.command, config, out)
}
