//! `mars`: corpus synthesis, training, transfer, evaluation and reporting.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mars_core::model::FusionVariant;
use mars_core::Error;

use commands::{Overrides, Split};

#[derive(Parser)]
#[command(name = "mars", version, about = "Virtual IMU synthesis and hybrid CNN activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; must not exist unless --overwrite is given.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured fusion variant.
    #[arg(long, value_parser = parse_fusion)]
    fusion: Option<FusionVariant>,
    /// Sensor set for synth, comma-separated sets for ablate.
    #[arg(long)]
    sensors: Option<String>,
    /// Replace an existing output directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a raw corpus and its windowed dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model from scratch on a synthesized dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory written by `synth`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Transfer a trained model to a new dataset and fine-tune it.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Run directory (or its model.ckpt) of the pretrained model.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a checkpoint on a dataset split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
    },
    /// Retrain for each sensor set of a synthesized corpus.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Directory written by `synth`.
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Redraw accuracy curves and a summary table from run directories.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directories containing report.toml.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn parse_fusion(s: &str) -> Result<FusionVariant, String> {
    s.parse().map_err(|_| format!("expected v1, v2 or v3, got `{s}`"))
}

fn run(command: Command) -> mars_core::Result<()> {
    let (name, common) = match &command {
        Command::Synth { common } => ("synth", common),
        Command::Train { common, .. } => ("train", common),
        Command::Finetune { common, .. } => ("finetune", common),
        Command::Eval { common, .. } => ("eval", common),
        Command::Ablate { common, .. } => ("ablate", common),
        Command::Report { common, .. } => ("report", common),
    };
    let overrides = Overrides {
        seed: common.seed,
        fusion: common.fusion,
        sensors: common.sensors.clone(),
    };
    let cfg = commands::load_config(common.config.as_deref(), &overrides, name)?;
    let (out, ow) = (&common.out, common.overwrite);
    match &command {
        Command::Synth { .. } => commands::synth(&cfg, out, ow),
        Command::Train { data, .. } => commands::train_cmd(&cfg, data, out, ow),
        Command::Finetune { checkpoint, data, .. } => commands::finetune(&cfg, checkpoint, data, out, ow),
        Command::Eval { checkpoint, data, split, .. } => commands::eval_cmd(&cfg, checkpoint, data, *split, out, ow),
        Command::Ablate { corpus, .. } => commands::ablate(&cfg, corpus, out, ow),
        Command::Report { runs, .. } => commands::report(&cfg, runs, out, ow),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::InvalidInput(_) | Error::Shape(_) | Error::Format { .. } => 3,
        Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
