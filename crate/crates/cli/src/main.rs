//! drm-rl: distortion-risk-measure estimation and policy optimization on
//! episodic MDPs.
//!
//! Subcommands: `estimate` (DRM estimation sweep), `optimize` (gradient
//! ascent), `oracle` (exact enumeration dump), `validate` (spec checks).
//! All take `--config` pointing at an experiment JSON; `--out`, `--mode`,
//! `--seed-offset`, and `--preset-theory` override the corresponding config
//! fields. The env var DRM_RL_THREADS caps sweep parallelism. Failures exit
//! nonzero with a machine-readable JSON object on stderr.

mod commands;
mod config;
mod oracle_view;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use drm_rl::Mode;

#[derive(Parser)]
#[command(name = "drm-rl", version, about = "DRM-sensitive policy optimization for episodic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the DRM of a fixed policy over a sweep of batch sizes.
    Estimate(CommonArgs),
    /// Run DRM gradient ascent across a seed sweep.
    Optimize(CommonArgs),
    /// Dump the exact return distribution, DRM, gradient, and M_s.
    Oracle(CommonArgs),
    /// Check the MDP spec, distortion, and behavior policy invariants.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Offset added to every seed in the sweep.
    #[arg(long, default_value_t = 0)]
    seed_offset: i64,
    /// Output directory, overriding the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Force the theory hyperparameter schedule (alpha = 1/sqrt(N),
    /// mu = N^(-1/4), n = N).
    #[arg(long)]
    preset_theory: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    On,
    Off,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::On => Mode::OnPolicy,
            ModeArg::Off => Mode::OffPolicy,
        }
    }
}

/// Parses the config, applies flag overrides, then loads the referenced
/// artifacts. Overrides land before loading so mode-dependent requirements
/// (behavior_path) see the final mode and summaries embed resolved values.
fn load_with_overrides(args: &CommonArgs) -> Result<config::LoadedExperiment> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        anyhow::anyhow!("reading config file {}: {e}", args.config.display())
    })?;
    let mut raw: config::ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("parsing config file {}: {e}", args.config.display()))?;
    if let Some(mode) = args.mode {
        raw.mode = mode.into();
    }
    if let Some(out) = &args.out {
        raw.output_dir = out.clone();
    }
    if args.preset_theory {
        raw.theory_preset = true;
    }
    config::load_resolved(&args.config, raw)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => {
            let exp = load_with_overrides(&args)?;
            commands::estimate::run(&exp, args.seed_offset)
        }
        Command::Optimize(args) => {
            let exp = load_with_overrides(&args)?;
            commands::optimize::run(&exp, args.seed_offset)
        }
        Command::Oracle(args) => {
            let exp = load_with_overrides(&args)?;
            commands::oracle::run(&exp)
        }
        Command::Validate(args) => commands::validate::run(&args.config),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let payload = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
