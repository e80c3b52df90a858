//! Front end of the `treedim` binary.
//!
//! Replicas run on a worker pool and are merged in replica order, so every
//! output depends only on the flags (and config file), never on the thread
//! count.

pub mod args;
pub mod commands;
pub mod error;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Parser;

use crate::args::{resolve, Cli, Command, Common};
use crate::commands::Output;
pub use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "TREEDIM_THREADS";

/// Parses `argv`, runs the command and writes its outputs. Returns the
/// process exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    let (common, summary_path, output) = match command {
        Command::Solve(flags) => {
            let args = resolve(&flags, flags.common.config.as_deref())?;
            let out = in_pool(&args.common, || commands::solve(&args))?;
            (args.common, None, out)
        }
        Command::Grow(flags) => {
            let args = resolve(&flags, flags.common.config.as_deref())?;
            let out = in_pool(&args.common, || commands::grow(&args))?;
            (args.common, args.summary, out)
        }
        Command::Entropy(flags) => {
            let args = resolve(&flags, flags.common.config.as_deref())?;
            let out = in_pool(&args.common, || commands::entropy(&args))?;
            (args.common, None, out)
        }
        Command::Leafwalk(flags) => {
            let args = resolve(&flags, flags.common.config.as_deref())?;
            let out = in_pool(&args.common, || commands::leafwalk(&args))?;
            (args.common, args.summary, out)
        }
        Command::OracleCheck(flags) => {
            let args = resolve(&flags, flags.common.config.as_deref())?;
            let out = in_pool(&args.common, || commands::oracle_check(&args))?;
            (args.common, None, out)
        }
    };
    emit(common.out.as_deref(), &output.main, stdout)?;
    if let Some(summary) = &output.summary {
        emit(summary_path.as_deref(), summary, stderr)?;
    }
    Ok(output.exit)
}

fn emit(path: Option<&Path>, text: &str, fallback: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => fallback
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<output>".into(),
                source,
            }),
    }
}

fn thread_count(common: &Common) -> Result<usize, CliError> {
    if let Some(t) = common.threads {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("{THREADS_ENV} must be a thread count, got `{v}`"))
        }),
        _ => Ok(0),
    }
}

fn in_pool<F>(common: &Common, job: F) -> Result<Output, CliError>
where
    F: FnOnce() -> Result<Output, CliError> + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(common)?)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(job)
}
