//! Oracle quantities with refusals folded into absence.
//!
//! Enumeration refuses on oversized MDPs (path budget) or incomplete return
//! distributions (residual mass). For reporting purposes those refusals
//! mean "no exact column", not a failed run; genuine errors still abort.

use anyhow::Result;

use drm_rl::{
    enumerate_return_distribution, exact_drm, max_importance_ratio, Distortion, Mdp, OracleError,
    PolicyParams,
};

use crate::config::LoadedExperiment;

/// Maps oracle refusals to None, propagating real errors.
pub fn soften<T>(result: Result<T, OracleError>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(OracleError::PathBudgetExceeded { .. }) | Err(OracleError::ResidualMass { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Exact DRM of a policy, or None when the oracle refuses.
pub fn exact_drm_of(
    mdp: &Mdp,
    theta: &PolicyParams,
    g: &Distortion,
    path_budget: usize,
) -> Result<Option<f64>> {
    soften(
        enumerate_return_distribution(mdp, theta, mdp.horizon_cap(), path_budget)
            .and_then(|dist| exact_drm(&dist, g)),
    )
}

/// Oracle view of the experiment's evaluation policy.
pub struct OracleView {
    pub exact_drm: Option<f64>,
    pub m_s: Option<f64>,
}

impl OracleView {
    pub fn compute(exp: &LoadedExperiment) -> Result<Self> {
        let budget = exp.config.path_budget();
        let exact = exact_drm_of(&exp.mdp, &exp.theta0, &exp.config.distortion, budget)?;
        let m_s = match &exp.behavior {
            Some(b) => soften(max_importance_ratio(
                &exp.mdp,
                &exp.theta0,
                b,
                exp.mdp.horizon_cap(),
                budget,
            ))?,
            None => None,
        };
        Ok(Self {
            exact_drm: exact,
            m_s,
        })
    }
}
