//! Command-line pipeline around the `sinusbench` library: synthesize,
//! preprocess, train, predict, query language models, evaluate, compare and
//! report, with every artifact kept under a locked run directory.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod run;
pub mod rundir;
pub mod stages;

pub use error::CliError;

use args::{Cli, Command};

/// Dispatches a parsed command line.
pub fn execute(cli: Cli) -> error::Result<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Genai(a) => commands::genai(a),
        Command::RagBuild(a) => commands::rag_build(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Importance(a) => commands::importance(a),
        Command::Report(a) => commands::report(a),
        Command::Run(a) => {
            let root = run::run(a)?;
            println!("{}", root.display());
            Ok(())
        }
    }
}
