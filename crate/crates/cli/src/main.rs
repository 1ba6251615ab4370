//! Batch command-line front end: validate taxonomies, export tokenizer
//! vocabularies, clean descriptions, decode them to tax codes and evaluate
//! predictions. All data flows as JSON Lines; runs with identical inputs and
//! flags produce byte-identical standard output.

mod commands;
mod records;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use taxcode::decoder::DecodeError;
use taxcode::metrics::MetricsError;
use taxcode::scorer::ScorerError;
use taxcode::taxonomy::{CodeKind, TaxonomyError};
use taxcode::textprep::TextPrepError;

#[derive(Parser)]
#[command(
    name = "taxcode",
    version,
    about = "Hierarchical HSN/SAC tax-code prediction"
)]
struct Cli {
    /// Reserved for future use; accepted and ignored (the pipeline is
    /// deterministic).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Hsn,
    Sac,
}

impl From<KindArg> for CodeKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Hsn => CodeKind::Hsn,
            KindArg::Sac => CodeKind::Sac,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a taxonomy CSV and print a structural summary.
    ValidateTaxonomy {
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Print the special-token vocabulary for a taxonomy, one token per line.
    Vocab {
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Clean descriptions from a JSONL file (`-` for stdin).
    Clean {
        /// Input records: {"id", "description", ...} per line.
        input: String,
        /// Cleaning config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Clean and decode descriptions to tax codes.
    Predict {
        /// Input records: {"id", "description", ...} per line (`-` for stdin).
        input: String,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Scorer spec: `uniform`, `table:<path>`, `knn:<train_jsonl>:<k>` or
        /// `external:<command>`.
        #[arg(long, default_value = "uniform")]
        scorer: String,
        /// Cleaning config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        beam_width: usize,
        /// How many ranked predictions to keep per record (extra ones are
        /// reported under "alternatives").
        #[arg(long, default_value_t = 1)]
        top_n: usize,
        /// Decode records concurrently; an external scorer forces 1.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Per-request timeout for an external scorer, in seconds.
        #[arg(long, default_value_t = 30)]
        scorer_timeout: u64,
        /// Emit per-record error objects instead of aborting on the first
        /// scorer failure.
        #[arg(long)]
        skip_errors: bool,
    },
    /// Score a predictions file against gold labels.
    Eval {
        /// Predictions JSONL, as produced by `predict`.
        predictions: String,
        /// Gold records JSONL; every record must carry a code.
        gold: String,
    },
}

/// Errors mapped to the documented exit codes: 1 data, 2 usage, 3 scorer.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Scorer(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
            CliError::Scorer(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Scorer(m) => m,
        }
    }
}

impl From<TaxonomyError> for CliError {
    fn from(err: TaxonomyError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<TextPrepError> for CliError {
    fn from(err: TextPrepError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<ScorerError> for CliError {
    fn from(err: ScorerError) -> Self {
        CliError::Scorer(err.to_string())
    }
}

impl From<DecodeError> for CliError {
    fn from(err: DecodeError) -> Self {
        match err {
            DecodeError::Scorer(e) => CliError::Scorer(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateTaxonomy { taxonomy, kind } => {
            commands::validate_taxonomy(&taxonomy, kind.into())
        }
        Command::Vocab { taxonomy, kind } => commands::vocab(&taxonomy, kind.into()),
        Command::Clean { input, config } => commands::clean(&input, config.as_deref()),
        Command::Predict {
            input,
            taxonomy,
            kind,
            scorer,
            config,
            beam_width,
            top_n,
            jobs,
            scorer_timeout,
            skip_errors,
        } => commands::predict(commands::PredictArgs {
            input: &input,
            taxonomy: &taxonomy,
            kind: kind.into(),
            scorer_spec: &scorer,
            config: config.as_deref(),
            beam_width,
            top_n,
            jobs,
            scorer_timeout,
            skip_errors,
        }),
        Command::Eval { predictions, gold } => commands::eval(&predictions, &gold),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
