//! `validate`: report-style check of an experiment's MDP spec, distortion,
//! and behavior policy. Prints the full report as JSON on stdout and exits
//! nonzero when anything is violated.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use drm_rl::{validate_distortion, validate_mdp, BehaviorPolicy, MdpSpec, ValidationReport};

use crate::config::ExperimentConfig;

#[derive(Serialize)]
struct ValidateOutput {
    valid: bool,
    mdp: ValidationReport,
    distortion: ValidationReport,
    behavior: Option<ValidationReport>,
}

pub fn run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config file {}", config_path.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config file {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));

    let mdp_path = base.join(&config.mdp_path);
    let spec_text = std::fs::read_to_string(&mdp_path)
        .with_context(|| format!("reading MDP spec file {}", mdp_path.display()))?;
    let spec: MdpSpec = serde_json::from_str(&spec_text)
        .with_context(|| format!("parsing MDP spec file {}", mdp_path.display()))?;
    let mdp_report = validate_mdp(&spec);

    let distortion_report =
        validate_distortion(config.distortion.kind(), config.distortion.r());

    let behavior_report = match &config.behavior_path {
        Some(path) => {
            let behavior_path = base.join(path);
            let behavior_text = std::fs::read_to_string(&behavior_path).with_context(|| {
                format!("reading behavior policy file {}", behavior_path.display())
            })?;
            let behavior: BehaviorPolicy =
                serde_json::from_str(&behavior_text).with_context(|| {
                    format!("parsing behavior policy file {}", behavior_path.display())
                })?;
            Some(behavior.validate(spec.num_states, spec.num_actions))
        }
        None => None,
    };

    let valid = mdp_report.is_valid()
        && distortion_report.is_valid()
        && behavior_report.as_ref().is_none_or(ValidationReport::is_valid);
    let output = ValidateOutput {
        valid,
        mdp: mdp_report,
        distortion: distortion_report,
        behavior: behavior_report,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    if !valid {
        return Err(anyhow!("validation failed; see report on stdout"));
    }
    Ok(())
}
