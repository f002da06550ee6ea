mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use conslaw::bench::BenchError;
use conslaw::dataset::DatasetError;
use serde::Serialize;
use thiserror::Error;

/// Output root used when a command gets no `--out`.
pub const OUTPUT_ROOT_ENV: &str = "CONSLAW_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no dataset for `{system}` under {}", path.display())]
    MissingDataset { system: String, path: PathBuf },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingDataset { .. } => "missing_dataset",
            CliError::Dataset(_) => "dataset",
            CliError::Bench(BenchError::Invalid(_)) => "usage",
            CliError::Bench(_) => "pipeline",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let record = ErrorRecord { error: kind, message };
    eprintln!("{}", serde_json::to_string(&record).expect("plain record"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string(), 2),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.kind() == "usage" { 2 } else { 1 };
            fail(e.kind(), e.to_string(), code)
        }
    }
}
