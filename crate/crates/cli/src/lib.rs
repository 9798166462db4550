//! The `pssr` command-line tool. Every subcommand writes its outputs and a
//! `manifest.json` under `--out`; `pssr replay --manifest` re-runs it.

pub mod args;
mod commands;
pub mod data;
pub mod manifest;

use std::ffi::OsString;

use anyhow::Result;
use clap::{CommandFactory, Parser};

pub use args::{Cli, Command};
pub use manifest::{Manifest, MANIFEST_FILE};

/// Parse `argv` (program name first), run the subcommand and return the exit code.
///
/// Failures print one line, `error[<subcommand>]: <message>`, followed by the
/// subcommand's usage, both on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{name}]: {}", format!("{e:#}").replace('\n', " "));
            eprintln!("{}", usage(name));
            1
        }
    }
}

fn usage(name: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(name) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

/// Run a parsed command, writing its manifest on success.
pub fn execute(command: Command) -> Result<()> {
    if let Command::Replay(r) = &command {
        let m = Manifest::read(&r.manifest)?;
        let mut cmd = m.command;
        if let Some(out) = &r.out {
            cmd.set_out(out.clone());
        }
        return execute(cmd);
    }
    let resolved = commands::dispatch(&command)?;
    if let Some(out) = command.out() {
        Manifest::new(&command, resolved, out)?.write(out)?;
    }
    Ok(())
}
