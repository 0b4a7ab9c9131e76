use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::harness::{self, Checkpoint, ExperimentKind, ExperimentOutput, ExperimentSpec};
use contrastive_lab::trainer::Trainer;
use contrastive_lab::{Error, Result};

/// Sparse-coding contrastive learning experiments.
#[derive(Parser)]
#[command(name = "lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a spec describes.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train one model and write its squared-cosine heatmap.
    Heatmap {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Matched-seed pruned vs unpruned comparison.
    PruneAb {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Save or inspect training checkpoints.
    Checkpoint {
        #[command(subcommand)]
        action: CheckpointAction,
    },
}

#[derive(Subcommand)]
enum CheckpointAction {
    /// Train the spec's first cell for some epochs and save the state.
    Save {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Epochs to train before saving (default: the configured count).
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Load a checkpoint, optionally train further and save again.
    Load {
        #[arg(long)]
        path: PathBuf,
        /// Additional epochs to run after loading.
        #[arg(long, default_value_t = 0)]
        resume_epochs: usize,
        /// Where to write the resumed checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("LAB_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config {
            field: "LAB_SEED".into(),
            reason: format!("not an unsigned integer: {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

fn load_spec(path: &Path, kind: Option<ExperimentKind>) -> Result<ExperimentSpec> {
    let mut spec = match kind {
        Some(k) => ExperimentSpec::load_as(path, k)?,
        None => ExperimentSpec::load(path)?,
    };
    if let Some(seed) = seed_override()? {
        spec.seed = seed;
    }
    Ok(spec)
}

fn report(out: &ExperimentOutput) {
    println!("wrote {} files to {}", out.files.len(), out.dir.display());
    for f in &out.files {
        println!("  {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
}

fn save_checkpoint(spec: &ExperimentSpec, out: &Path, epochs: Option<usize>) -> Result<()> {
    let seed = spec.seed;
    let dict = Dictionary::build(spec.dims.d1, spec.dims.d, seed)?;
    let profile = spec.feature_profile(spec.grid.eps_min[0])?;
    let mut cfg = spec.train_config(seed);
    if let Some(n) = epochs {
        cfg.epochs = cfg.epochs.max(n);
    }
    let target = epochs.unwrap_or(cfg.epochs);
    let mut trainer = Trainer::new(&dict, &profile, spec.noise(spec.grid.nsr[0])?, spec.dims.model(), cfg)?;
    while trainer.epoch() < target {
        trainer.run_epoch()?;
    }
    Checkpoint::capture(&trainer).save(out)?;
    println!("saved epoch {} to {}", trainer.epoch(), out.display());
    Ok(())
}

fn load_checkpoint(path: &Path, more: usize, out: Option<&Path>) -> Result<()> {
    let mut ckpt = Checkpoint::load(path)?;
    println!(
        "{} epoch {} m {} d1 {} d {} alpha {}",
        ckpt.version,
        ckpt.epoch,
        ckpt.state.m(),
        ckpt.dictionary.d1(),
        ckpt.dictionary.d(),
        ckpt.config.alpha
    );
    if more > 0 {
        ckpt.config.epochs = ckpt.config.epochs.max(ckpt.epoch + more);
        let mut trainer = ckpt.resume()?;
        let mut last = None;
        for _ in 0..more {
            last = Some(trainer.run_epoch()?);
        }
        if let Some(r) = last {
            println!("epoch {} loss_infonce {}", r.epoch, r.loss_infonce);
        }
        let next = Checkpoint::capture(&trainer);
        if let Some(o) = out {
            next.save(o)?;
            println!("saved epoch {} to {}", next.epoch, o.display());
        }
    } else if let Some(o) = out {
        ckpt.save(o)?;
        println!("saved epoch {} to {}", ckpt.epoch, o.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { spec, jobs } => report(&harness::run_experiment(&load_spec(&spec, None)?, jobs)?),
        Command::Heatmap { spec } => {
            report(&harness::run_experiment(&load_spec(&spec, Some(ExperimentKind::Heatmap))?, 1)?)
        }
        Command::PruneAb { spec, jobs } => {
            report(&harness::run_experiment(&load_spec(&spec, Some(ExperimentKind::PruneAb))?, jobs)?)
        }
        Command::Checkpoint { action } => match action {
            CheckpointAction::Save { spec, out, epochs } => save_checkpoint(&load_spec(&spec, None)?, &out, epochs)?,
            CheckpointAction::Load {
                path,
                resume_epochs,
                out,
            } => load_checkpoint(&path, resume_epochs, out.as_deref())?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
