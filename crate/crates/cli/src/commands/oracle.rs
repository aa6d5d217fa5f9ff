//! `oracle`: dump the exact return distribution, exact DRM,
//! finite-difference gradient, and (with a behavior policy) the
//! importance-ratio bound M_s, as JSON on stdout and in the output
//! directory.

use anyhow::{Context, Result};
use serde::Serialize;

use drm_rl::{
    enumerate_return_distribution, exact_drm, finite_difference_gradient, max_importance_ratio,
};

use crate::config::{ExperimentConfig, LoadedExperiment};
use crate::output::write_json;

#[derive(Serialize)]
struct OracleOutput<'a> {
    config: &'a ExperimentConfig,
    atoms: Vec<(f64, f64)>,
    residual_mass: f64,
    exact_drm: f64,
    fd_gradient: Vec<f64>,
    m_s: Option<f64>,
}

pub fn run(exp: &LoadedExperiment) -> Result<()> {
    let cfg = &exp.config;
    let budget = cfg.path_budget();
    let dist = enumerate_return_distribution(
        &exp.mdp,
        &exp.theta0,
        exp.mdp.horizon_cap(),
        budget,
    )
    .context("enumerating the return distribution")?;
    let drm = exact_drm(&dist, &cfg.distortion).context("computing the exact DRM")?;
    let fd_gradient = finite_difference_gradient(
        &exp.mdp,
        &exp.theta0,
        &cfg.distortion,
        cfg.fd_step(),
        budget,
    )
    .context("computing the finite-difference gradient")?;
    let m_s = match &exp.behavior {
        Some(b) => Some(
            max_importance_ratio(&exp.mdp, &exp.theta0, b, exp.mdp.horizon_cap(), budget)
                .context("computing the importance-ratio bound")?,
        ),
        None => None,
    };
    let output = OracleOutput {
        config: cfg,
        atoms: dist.atoms().to_vec(),
        residual_mass: dist.residual_mass(),
        exact_drm: drm,
        fd_gradient,
        m_s,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    write_json(&cfg.output_dir.join("oracle.json"), &output)?;
    Ok(())
}
