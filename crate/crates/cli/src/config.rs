//! Experiment configuration: file schema, flag overrides, and loading of
//! the referenced artifacts.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use drm_rl::{
    BehaviorPolicy, Distortion, Mdp, MdpSpec, Mode, OptConfig, PolicyParams, SfConfig,
    DEFAULT_FD_STEP, DEFAULT_PATH_BUDGET,
};

/// One config file drives every subcommand; fields irrelevant to a command
/// are ignored by it, unknown fields are rejected outright.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// MDP spec file, relative to this config file.
    pub mdp_path: PathBuf,
    pub distortion: Distortion,
    pub mode: Mode,
    /// Behavior policy file; required in off-policy mode.
    #[serde(default)]
    pub behavior_path: Option<PathBuf>,
    /// Initial / evaluation policy parameters as a flat JSON array;
    /// defaults to the zero vector (uniform policy).
    #[serde(default)]
    pub theta0_path: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub n_iterations: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub n_directions: Option<usize>,
    #[serde(default)]
    pub episodes_per_eval: Option<usize>,
    #[serde(default)]
    pub theory_preset: bool,
    /// Batch sizes for the `estimate` sweep.
    #[serde(default)]
    pub m_sweep: Option<Vec<usize>>,
    /// Write a theta checkpoint every this many iterations.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub path_budget: Option<usize>,
}

impl ExperimentConfig {
    pub fn fd_step(&self) -> f64 {
        self.fd_step.unwrap_or(DEFAULT_FD_STEP)
    }

    pub fn path_budget(&self) -> usize {
        self.path_budget.unwrap_or(DEFAULT_PATH_BUDGET)
    }

    /// Seeds with the command-line offset applied.
    pub fn offset_seeds(&self, seed_offset: i64) -> Vec<u64> {
        self.seeds
            .iter()
            .map(|s| s.wrapping_add_signed(seed_offset))
            .collect()
    }

    /// Assembles the optimizer config for one seed, enforcing the theory
    /// schedule when requested and otherwise requiring explicit
    /// hyperparameters.
    pub fn opt_config(&self, master_seed: u64, d: usize) -> Result<OptConfig> {
        let n_iterations = self
            .n_iterations
            .ok_or_else(|| anyhow!("config field `n_iterations` is required for optimize"))?;
        let episodes_per_eval = self
            .episodes_per_eval
            .ok_or_else(|| anyhow!("config field `episodes_per_eval` is required for optimize"))?;
        let cfg = if self.theory_preset {
            OptConfig::theory(
                n_iterations,
                episodes_per_eval,
                self.distortion,
                self.mode,
                master_seed,
                d,
            )
        } else {
            OptConfig {
                n_iterations,
                step_size: self
                    .step_size
                    .ok_or_else(|| anyhow!("config field `step_size` is required unless theory_preset"))?,
                sf: SfConfig {
                    mu: self
                        .mu
                        .ok_or_else(|| anyhow!("config field `mu` is required unless theory_preset"))?,
                    n: self.n_directions.ok_or_else(|| {
                        anyhow!("config field `n_directions` is required unless theory_preset")
                    })?,
                    d,
                },
                episodes_per_eval,
                distortion: self.distortion,
                mode: self.mode,
                theory_preset: false,
                master_seed,
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Config plus every artifact it references.
pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub mdp: Mdp,
    pub behavior: Option<BehaviorPolicy>,
    pub theta0: PolicyParams,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {what} file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} file {}", path.display()))
}

/// Loads the artifacts referenced by an already-parsed (possibly
/// flag-overridden) config. Input paths resolve relative to the config
/// file's directory; `config_path` only anchors them.
pub fn load_resolved(config_path: &Path, config: ExperimentConfig) -> Result<LoadedExperiment> {
    if config.seeds.is_empty() {
        return Err(anyhow!("config field `seeds` must not be empty"));
    }
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));

    let spec: MdpSpec = read_json(&base.join(&config.mdp_path), "MDP spec")?;
    let mdp = Mdp::compile(spec).context("compiling MDP spec")?;
    let d = mdp.num_states() * mdp.num_actions();

    let behavior = match (&config.behavior_path, config.mode) {
        (Some(path), _) => {
            let b: BehaviorPolicy = read_json(&base.join(path), "behavior policy")?;
            let report = b.validate(mdp.num_states(), mdp.num_actions());
            if !report.is_valid() {
                return Err(anyhow!(
                    "behavior policy invalid: {}",
                    report.violations.join("; ")
                ));
            }
            Some(b)
        }
        (None, Mode::OffPolicy) => {
            return Err(anyhow!(
                "config field `behavior_path` is required when mode is \"off\""
            ));
        }
        (None, Mode::OnPolicy) => None,
    };

    let theta0 = match &config.theta0_path {
        Some(path) => {
            let theta: PolicyParams = read_json(&base.join(path), "policy parameters")?;
            if theta.dim() != d {
                return Err(anyhow!(
                    "policy parameters in {} have {} entries, MDP needs {d}",
                    path.display(),
                    theta.dim()
                ));
            }
            theta.validate()?;
            theta
        }
        None => PolicyParams::zeros(d),
    };

    Ok(LoadedExperiment {
        config,
        mdp,
        behavior,
        theta0,
    })
}

/// Builds a rayon pool sized by DRM_RL_THREADS when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("DRM_RL_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| anyhow!("DRM_RL_THREADS must be a positive integer, got {raw:?}"))?;
        if threads == 0 {
            return Err(anyhow!("DRM_RL_THREADS must be at least 1"));
        }
        builder = builder.num_threads(threads);
    }
    builder.build().context("building thread pool")
}
