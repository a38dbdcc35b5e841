//! The `spectroemg` command line: synth, featurize, train, evaluate, predict.

mod commands;
mod config;

pub use config::{ConfigOverrides, RunConfig, CONFIG_KEYS};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_DATASET: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_ARTIFACT: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "spectroemg", version, about = "Spectrogram-based EMG classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Write synthetic labelled recordings and a manifest.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Recordings per class.
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Subjects per class; recordings are dealt to them round-robin.
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        /// Samples per recording.
        #[arg(long, default_value_t = crate::ingest::WINDOW_LEN)]
        samples: usize,
        #[command(flatten)]
        config: ConfigOverrides,
    },
    /// Window, resample and featurize every recording of a manifest into
    /// train/val/test feature files.
    Featurize {
        /// Manifest CSV (`path,format,label,subject,split`).
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for `train.sftr`, `val.sftr`, `test.sftr` and `index.csv`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigOverrides,
    },
    /// Train a classifier on featurized data.
    Train {
        /// Directory holding `train.sftr` and `val.sftr`.
        #[arg(long)]
        features: PathBuf,
        /// Output directory for `model.smdl` and `history.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Also rewrite a checkpoint in this directory after every epoch.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigOverrides,
    },
    /// Evaluate a model on the test split, or score a predictions CSV.
    Evaluate {
        /// Model file.
        #[arg(long, required_unless_present = "predictions", requires = "features")]
        model: Option<PathBuf>,
        /// Directory holding `test.sftr`.
        #[arg(long)]
        features: Option<PathBuf>,
        /// CSV of `true,predicted` label names to score instead of a model.
        #[arg(long, conflicts_with_all = ["model", "features"])]
        predictions: Option<PathBuf>,
        /// Output directory for `report.json`, `confusion.csv` and `confusion.svg`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigOverrides,
    },
    /// Classify every window of a raw signal file.
    Predict {
        /// Model file.
        #[arg(long)]
        model: PathBuf,
        /// Signal file (`.semg` or single-column text).
        #[arg(long)]
        signal: PathBuf,
        /// Signal format; inferred from the extension when omitted.
        #[arg(long, value_parser = ["semg", "txt"])]
        format: Option<String>,
        #[command(flatten)]
        config: ConfigOverrides,
    },
}

/// Process exit status for a pipeline error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. }
        | Error::MalformedHeader(_)
        | Error::EmptyRecording(_)
        | Error::InvalidArgument(_)
        | Error::Shape(_)
        | Error::InvalidLabel(_)
        | Error::Manifest(_) => EXIT_BAD_INPUT,
        Error::Split(_) | Error::Dataset(_) => EXIT_DATASET,
        Error::NonFinite(_) | Error::NonFiniteLoss { .. } => EXIT_NUMERICAL,
        Error::Version { .. } | Error::Checksum(_) | Error::ConfigMismatch(_) => EXIT_ARTIFACT,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
