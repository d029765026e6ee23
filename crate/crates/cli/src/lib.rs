//! Command-line workflows over the assessment library: dataset ingestion and
//! generation, per-exercise training, evaluation, train-size sweeps, report
//! rendering, and annotator agreement.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/schema/configuration error,
//! 3 numerical failure. Every run that owns an output directory logs its
//! fully resolved configuration there as resolved_config.json; that file
//! replays the run when passed back via `--spec`.

use std::ffi::OsString;

use clap::Parser;

use rehab_core::error::Error;

pub mod args;
pub mod cache;
pub mod commands;
pub mod io;

use args::{Cli, Command};

fn exit_code(error: &Error) -> i32 {
    match error.category() {
        "usage" => 1,
        "numerical" => 3,
        _ => 2,
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // Help and version go to stdout, errors with usage to stderr.
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);

    let result = match &cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Generate(args) => commands::generate(args),
        Command::TrainGmm(args) => commands::train_gmm(args),
        Command::TrainStgcn(args) => commands::train_stgcn(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Report(args) => commands::report(args),
        Command::Agreement(args) => commands::agreement(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
