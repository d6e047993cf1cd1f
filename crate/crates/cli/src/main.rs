//! `distillkit` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid
//! configuration or usage.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "distillkit",
    version,
    about = "Distillation and residual-feature experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a network on hard labels.
    Train {
        /// Train the student architecture with the student learning rate.
        #[arg(long)]
        student: bool,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Distil a student from a trained teacher.
    Distill {
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[arg(long)]
        temperature: Option<u32>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Distil one student per temperature and tabulate the results.
    Sweep {
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Comma-separated temperatures, e.g. 1,10,20.
        #[arg(long, value_delimiter = ',')]
        temperatures: Option<Vec<u32>>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate checkpoints on the held-out split.
    Eval {
        /// `name=checkpoint.json`; repeatable.
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long)]
        baseline: Option<String>,
        /// Evaluate on every image of this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Write stego versions of cover images.
    Embed {
        #[arg(long)]
        covers: Option<PathBuf>,
        #[arg(long)]
        change_rate: Option<f64>,
    },
    /// Compute co-occurrence features for every image of a manifest.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Fit a cover/stego detector on extracted features and score held-out pairs.
    Detect {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Write the synthetic two-class dataset as images plus a manifest.
    Synth {
        #[arg(long)]
        count_per_class: Option<usize>,
    },
}

fn configure_threads() -> distillkit::Result<()> {
    let Ok(raw) = std::env::var("DISTILLKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        distillkit::Error::Config(format!(
            "DISTILLKIT_THREADS={raw:?} is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| distillkit::Error::State(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| commands::run(cli.common, cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
