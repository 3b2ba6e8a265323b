//! `qcb` command-line front end: argument parsing, configuration merging,
//! sweep orchestration and CSV/JSON emission.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical or I/O error.

pub mod args;
pub mod commands;
pub mod config;
pub mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use args::{Cli, Command, EdCommand, LdeCommand};
use commands::{CliError, CliResult};
use config::{merge_config, ConfigError};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "QCB_THREADS";

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} = `{v}` is not a positive integer")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Werner(a) => emit(None, &commands::werner(a)?),
        Command::Gaussian(a) => emit(a.out.as_ref(), &commands::gaussian(a)?),
        Command::OptomechUnitary(a) => emit(a.out.as_ref(), &commands::optomech_unitary(a)?),
        Command::OptomechSteady(a) => emit(a.out.as_ref(), &commands::optomech_steady(a)?),
        Command::Lde(LdeCommand::Chi(a)) => emit(None, &commands::lde_chi(a)?),
        Command::Lde(LdeCommand::Thermal(a)) => emit(a.out.as_ref(), &commands::lde_thermal(a)?),
        Command::Lde(LdeCommand::Fit(a)) => emit(a.out.as_ref(), &commands::lde_fit(a)?),
        Command::Ed(EdCommand::Run(a)) => emit(a.out.as_ref(), &commands::ed_run(a)?),
        Command::Ed(EdCommand::Report(a)) => emit(a.out.as_ref(), &commands::ed_report(a)?),
    }
}

/// Runs one command line (including the program name) and returns the
/// process exit code; diagnostics go to standard error.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(ConfigError::Syntax(m)) => return fail(CliError::Usage(m)),
        Err(ConfigError::Io(m)) => return fail(CliError::Io(m)),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match init_threads().and_then(|()| dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> i32 {
    eprintln!("qcb: {e}");
    e.exit_code()
}
