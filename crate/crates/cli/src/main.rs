//! Batch command-line surface for the point-cloud saliency toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use pcsod_cli::commands::{bench, eval, gradcheck, predict, synth, train};
use pcsod_cli::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "pcsod",
    about = "Salient object detection for point-cloud views: synthesize data, train, evaluate, predict",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth(synth::SynthArgs),
    /// Train on a dataset's train split.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint over a split.
    Eval(eval::EvalArgs),
    /// Predict saliency for a single view.
    Predict(predict::PredictArgs),
    /// Verify gradients against finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Time pipeline stages on a synthetic view.
    Bench(bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result: Result<(), CliError> = match &cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Gradcheck(args) => gradcheck::run(args),
        Command::Bench(args) => bench::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
