//! `axsnn` — command-line front end for the robustness workbench.
//!
//! Subcommands mirror the pipeline stages: `train` fits an accurate network,
//! `attack` emits adversarial sets, `filter` denoises event streams, `eval`
//! scores a single grid cell, and `sweep` runs the full grid search.
//!
//! Exit codes: 0 success, 2 sweep finished but no configuration met the
//! quality level, 3 quality-gate failure, 4 I/O or parse error, 1 any other
//! error.

mod attack;
mod config;
mod data;
mod eval;
mod filter;
mod sweep;
mod train;

use clap::error::ErrorKind;
use clap::Parser;

use axsnn_core::Error;

/// Workbench for approximate spiking networks under adversarial attack.
#[derive(Debug, Parser)]
#[command(name = "axsnn", version, about, max_term_width = 100)]
enum Cli {
    Train(train::TrainArgs),
    Attack(attack::AttackArgs),
    Filter(filter::FilterArgs),
    Eval(eval::EvalArgs),
    Sweep(sweep::SweepArgs),
}

/// Exit code when a sweep completes but no configuration reached Q.
pub(crate) const EXIT_NO_CONFIG_MET_QUALITY: i32 = 2;
/// Exit code when a requested configuration fails its quality gate.
pub(crate) const EXIT_QUALITY_GATE: i32 = 3;
/// Exit code for I/O, file-format, and configuration parse errors.
pub(crate) const EXIT_IO_OR_PARSE: i32 = 4;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) | Error::Config(_) => EXIT_IO_OR_PARSE,
        Error::QualityGate { .. } => EXIT_QUALITY_GATE,
        _ => 1,
    }
}

/// Attach the offending path to bare I/O errors, which otherwise surface as
/// "No such file or directory" with no hint of which file was meant.
pub(crate) fn annotate<T>(
    result: axsnn_core::Result<T>,
    path: &std::path::Path,
) -> axsnn_core::Result<T> {
    result.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            // Malformed flags are parse errors, same as a malformed file.
            eprint!("{e}");
            std::process::exit(EXIT_IO_OR_PARSE);
        }
    };

    let result = match cli {
        Cli::Train(args) => train::run(&args),
        Cli::Attack(args) => attack::run(&args),
        Cli::Filter(args) => filter::run(&args),
        Cli::Eval(args) => eval::run(&args),
        Cli::Sweep(args) => sweep::run(&args),
    };

    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
