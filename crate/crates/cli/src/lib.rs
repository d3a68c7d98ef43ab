//! The `ddsd` command line: synthetic corpora, feature extraction, component
//! and fusion training, embedding export, corruption and evaluation.
//!
//! Any command accepts `--config FILE` holding `key = value` lines named like
//! its flags; flags given on the command line take precedence.

mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

pub use args::*;
pub use config::{parse_config, ConfigError};
pub use error::CliError;

/// Splices the `--config` file's pairs in as `--key=value` flags right after
/// the subcommand, so explicit flags that follow override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    if args.len() < 2 || args[1].to_string_lossy().starts_with('-') {
        return Ok(args);
    }
    let mut path: Option<OsString> = None;
    let mut i = 2;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            path = args.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.into());
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(args) };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let pairs = parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = args[..2].to_vec();
    for (k, v) in pairs {
        if k == "config" {
            return Err(CliError::Usage(format!("{}: config files cannot nest", path.display())));
        }
        out.push(format!("--{k}={v}").into());
    }
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

/// Runs one invocation and returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}", e.line());
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).line());
            return 2;
        }
    };
    match commands::run(&cli.command) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
