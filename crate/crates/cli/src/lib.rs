//! The `mmfact` command line.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;
use mmfact_core::{Error, Result};

use crate::args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MMFACT_THREADS";

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

pub fn execute(command: &Command) -> Result<()> {
    let pool = thread_pool()?;
    pool.install(|| match command {
        Command::Score(a) => commands::score(a),
        Command::Tune(a) => commands::tune(a),
        Command::MetaEval(a) => commands::meta_eval(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Reward(a) => commands::reward(a),
    })
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
