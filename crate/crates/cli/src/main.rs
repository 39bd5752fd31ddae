//! `sarcrop` command-line front end.
//!
//! Every failure prints one line `error[CODE] exit=N: message` to stderr and
//! exits with N (2 config, 3 data, 4 integrity, 5 divergence).

mod commands;
mod config;
mod manifest;
mod mosaic;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sarcrop::eval::Averaging;
use sarcrop::transfer::FinetuneMode;
use sarcrop::Result;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "sarcrop", version, about = "Transfer learning for SAR time-series crop segmentation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Probability threshold for positive pixels.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Visible-step counts for early prediction, e.g. `1,2,4,8`.
    #[arg(long, global = true, value_delimiter = ',')]
    early_steps: Option<Vec<usize>>,
}

#[derive(Args, Default)]
struct DataArgs {
    /// Training / fine-tune dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated feature names, e.g. `VH,VV`.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
}

#[derive(Args, Default)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Disable chronological batch ordering.
    #[arg(long)]
    no_curriculum: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from scratch with chronologically ordered batches.
    Pretrain {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Fine-tune a checkpoint under RI, FT, FT_E, FT_D or FT_D_LAST(k).
    Finetune {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        mode: Option<FinetuneMode>,
        /// Comma-separated seeds, one fine-tuned checkpoint each.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Write thresholded masks and a mosaic for one checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Use only the first N time steps.
        #[arg(long)]
        t_avail: Option<usize>,
    },
    /// Score checkpoints and the random-forest baseline on a test set.
    Evaluate {
        #[arg(long)]
        test_data: Option<PathBuf>,
        /// Checkpoint to score, as `METHOD=PATH` or `METHOD@SEED=PATH`; repeatable.
        #[arg(long = "model", value_parser = parse_model)]
        models: Vec<(String, PathBuf)>,
        /// Also train and score a random forest on --data.
        #[arg(long)]
        rf: bool,
        /// Scenario preset id (1-10) for reference values.
        #[arg(long)]
        scenario: Option<u32>,
        #[arg(long, value_enum)]
        averaging: Option<AveragingArg>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Widen a checkpoint's first layer to new input features.
    AdaptChannels {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// source_rice, target_shifted_rice, two_variant_rice, vv_discriminative or barley_like.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        n_patches: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
    },
    /// Split a dataset into train and test parts.
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Load a checkpoint with full integrity checks; optionally verify a channel expansion.
    VerifyCheckpoint {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Checkpoint the verified one was expanded from.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AveragingArg {
    Micro,
    PatchMean,
}

fn parse_model(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (k, v) = s.split_once('=').ok_or("expected METHOD=PATH")?;
    Ok((k.to_string(), PathBuf::from(v)))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_data(cfg: &mut RunConfig, a: DataArgs) {
    set_opt(&mut cfg.data, a.data);
    set_opt(&mut cfg.features, a.features);
}

fn apply_train(cfg: &mut RunConfig, a: TrainArgs, fallback: sarcrop::train::TrainConfig) {
    if a.epochs.is_none() && a.lr.is_none() && a.batch_size.is_none() && !a.no_curriculum {
        return;
    }
    let t = cfg.train.get_or_insert(fallback);
    set(&mut t.epochs, a.epochs);
    set(&mut t.learning_rate, a.lr);
    set(&mut t.batch_size, a.batch_size);
    if a.no_curriculum {
        t.curriculum = false;
    }
}

fn resolve(cli: Cli) -> Result<(RunConfig, Command)> {
    let Cli { common, command } = cli;
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, common.seed);
    set_opt(&mut cfg.out, common.out);
    set(&mut cfg.threshold, common.threshold);
    set(&mut cfg.early_steps, common.early_steps);
    Ok((cfg, command))
}

fn run(cli: Cli) -> Result<()> {
    let (mut cfg, command) = resolve(cli)?;
    use sarcrop::train::TrainConfig;
    match command {
        Command::Pretrain { data, train } => {
            apply_data(&mut cfg, data);
            apply_train(&mut cfg, train, TrainConfig::default());
            cfg.validate()?;
            commands::pretrain(&cfg)
        }
        Command::Finetune {
            checkpoint,
            mode,
            seeds,
            data,
            train,
        } => {
            set_opt(&mut cfg.checkpoint, checkpoint);
            set(&mut cfg.mode, mode);
            set_opt(&mut cfg.seeds, seeds);
            apply_data(&mut cfg, data);
            apply_train(&mut cfg, train, TrainConfig::finetune());
            cfg.validate()?;
            commands::finetune(&cfg)
        }
        Command::Predict { checkpoint, data, t_avail } => {
            set_opt(&mut cfg.checkpoint, checkpoint);
            set_opt(&mut cfg.data, data);
            set_opt(&mut cfg.t_avail, t_avail);
            cfg.validate()?;
            commands::predict(&cfg)
        }
        Command::Evaluate {
            test_data,
            models,
            rf,
            scenario,
            averaging,
            seeds,
            data,
        } => {
            set_opt(&mut cfg.test_data, test_data);
            if !models.is_empty() {
                cfg.models = models.into_iter().collect();
            }
            cfg.rf |= rf;
            set_opt(&mut cfg.scenario, scenario);
            if let Some(a) = averaging {
                cfg.averaging = match a {
                    AveragingArg::Micro => Averaging::Micro,
                    AveragingArg::PatchMean => Averaging::PatchMean,
                };
            }
            set_opt(&mut cfg.seeds, seeds);
            apply_data(&mut cfg, data);
            cfg.validate()?;
            commands::evaluate(&cfg)
        }
        Command::AdaptChannels { checkpoint, features } => {
            set_opt(&mut cfg.checkpoint, checkpoint);
            set_opt(&mut cfg.features, features);
            cfg.validate()?;
            commands::adapt_channels(&cfg)
        }
        Command::Synth {
            preset,
            n_patches,
            features,
        } => {
            set_opt(&mut cfg.n_patches, n_patches);
            set_opt(&mut cfg.features, features);
            cfg.validate()?;
            commands::synth(&cfg, preset.as_deref())
        }
        Command::Split { data, ratio } => {
            set_opt(&mut cfg.data, data);
            set(&mut cfg.ratio, ratio);
            cfg.validate()?;
            commands::split(&cfg)
        }
        Command::VerifyCheckpoint { checkpoint, reference } => {
            set_opt(&mut cfg.checkpoint, checkpoint);
            set_opt(&mut cfg.reference, reference);
            commands::verify_checkpoint(&cfg)
        }
    }
}

fn fail(code: &str, exit: u8, msg: &str) -> ExitCode {
    let one_line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{code}] exit={exit}: {one_line}");
    ExitCode::from(exit)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let first = e.to_string();
            let msg = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("E_USAGE", 2, msg);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code(), e.exit_code() as u8, &e.to_string()),
    }
}
