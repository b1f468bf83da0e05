mod compare;
mod config;
mod evaluate;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use divgen_core::baselines::BaselineKind;

use crate::config::Overrides;

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_PROVIDER: u8 = 4;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_CONFIG, error: e.into() }
    }

    pub fn other(e: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_FAILED, error: e.into() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "divgen", version, about = "Diverse synthetic data generation with determinantal point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override, e.g. `engine.target_size=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Use the offline mock provider regardless of the config.
    #[arg(long)]
    mock: bool,
}

impl ConfigArgs {
    fn overrides(&self, trace: bool) -> Overrides {
        Overrides { seed: self.seed, set: self.set.clone(), mock: self.mock, trace }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the generator and write a dataset, report and manifest.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Record the per-instance trace (trace.jsonl and rejection rates).
        #[arg(long)]
        trace: bool,
        /// Continue from `snapshot.json` in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run one comparison baseline.
    Baseline {
        /// default, temp, diverse, history, hierarchical or subset_select.
        #[arg(value_parser = parse_kind)]
        kind: BaselineKind,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the diversity report for an existing dataset file.
    Evaluate {
        /// dataset.jsonl
        dataset: PathBuf,
        /// Embedding sidecar; defaults to embeddings.jsonl next to the dataset.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Side-by-side table of two or more reports.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Directory for comparison.json and rejection_series.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe the task prompt and print the starting threshold.
    InitThreshold {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<BaselineKind, String> {
    s.parse()
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Generate { config, out, trace, resume } => {
            run::generate(config.config.as_deref(), &config.overrides(trace), &out, resume)
        }
        Command::Baseline { kind, config, out } => run::baseline(kind, config.config.as_deref(), &config.overrides(false), &out),
        Command::Evaluate { dataset, embeddings, config, out } => evaluate::evaluate(
            &dataset,
            embeddings.as_deref(),
            config.config.as_deref(),
            &config.overrides(false),
            out.as_deref(),
        ),
        Command::Compare { reports, out } => compare::compare(&reports, out.as_deref()),
        Command::InitThreshold { config, out } => {
            run::init_threshold(config.config.as_deref(), &config.overrides(false), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
