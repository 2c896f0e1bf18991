//! `acw`: mine warning histories, weakly label them, train the two-stage
//! ranker, rank fresh reports, evaluate, and serve a triage API.

pub mod commands;
pub mod output;
pub mod service;
pub mod session;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use acw_core::AcwConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acw", version, about = "Rank static-analysis warnings by how likely they are real bugs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track warnings across history and classify each episode.
    Mine(commands::MineArgs),
    /// Weakly label mined warnings from their fix commits.
    Label(commands::LabelArgs),
    /// Train the detector and reranker on a labeled corpus.
    Train(commands::TrainArgs),
    /// Rank the warnings of one analyzer report.
    Rank(commands::RankArgs),
    /// Evaluate a model on its held-out split.
    Eval(commands::EvalArgs),
    /// Serve the ranked list and record triage judgments.
    Serve(service::ServeArgs),
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = AcwConfig::from_env()
        .map_err(anyhow::Error::from)
        .and_then(|cfg| match cli.command {
            Command::Mine(a) => commands::mine(&a, &cfg),
            Command::Label(a) => commands::label(&a, &cfg),
            Command::Train(a) => commands::train(&a, &cfg),
            Command::Rank(a) => commands::rank(&a, &cfg),
            Command::Eval(a) => commands::eval(&a),
            Command::Serve(a) => service::serve(&a, &cfg),
        });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}
