//! `clids`: preprocess, train, prune, evaluate, explain and search.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data or model
//! error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{CmdResult, Failure};
use config::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "clids", version, about = "Competitive-learning intrusion detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON, config_version 1).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir, else ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the encoder and write encoded features and global significance.
    Preprocess {
        #[command(flatten)]
        common: Common,
    },
    /// Train the configured model and write model.json and quality.json.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Prune a ghsom model against its training data.
    Prune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Confidence parameter; defaults to the config value, else 0.3.
        #[arg(long)]
        delta: Option<f64>,
        /// Labelled CSV to prune against instead of the config's training data.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Score a model on labelled test data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Labelled CSV; defaults to the config's test data.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Write explanation artifacts as JSON and SVG.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV rows to explain individually.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Only draw heatmaps for the k most significant model inputs.
        #[arg(long)]
        top_features: Option<usize>,
    },
    /// Random search over the config's search space.
    Search {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common, required: bool) -> CmdResult<Option<RunConfig>> {
    let Some(path) = &common.config else {
        return if required { Err(Failure::Config(anyhow::anyhow!("--config is required"))) } else { Ok(None) };
    };
    let mut cfg = RunConfig::load(path).map_err(Failure::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        if let serde_json::Value::Object(p) = &mut cfg.model.params {
            p.remove("seed");
        }
    }
    Ok(Some(cfg))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Preprocess { common } => {
            let cfg = load_config(&common, true)?.expect("required");
            commands::preprocess(&cfg, common.out)
        }
        Command::Train { common } => {
            let cfg = load_config(&common, true)?.expect("required");
            commands::train(&cfg, common.out)
        }
        Command::Prune { common, model, delta, train } => {
            let cfg = load_config(&common, false)?;
            commands::prune(&model, train.as_deref(), cfg.as_ref(), delta, common.out)
        }
        Command::Evaluate { common, model, test } => {
            let cfg = load_config(&common, false)?;
            commands::evaluate(&model, test.as_deref(), cfg.as_ref(), common.out)
        }
        Command::Explain { common, model, samples, top_features } => {
            commands::explain(&model, samples.as_deref().map(Path::new), top_features, common.out)
        }
        Command::Search { common } => {
            let cfg = load_config(&common, true)?.expect("required");
            commands::search(&cfg, common.out)
        }
    }
}

/// The error chain, skipping causes whose text a wrapper already repeats.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(f.error()));
            ExitCode::from(f.exit_code())
        }
    }
}
