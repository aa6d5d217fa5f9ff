//! Two-point smoothed-functional gradient estimation.
//!
//! The objective is only available as a black box, so its gradient is
//! estimated from paired evaluations at `theta + mu v` and `theta - mu v`
//! for directions `v` drawn uniformly from the unit sphere:
//!
//! `grad_est = (d/n) sum_i ((F(theta + mu v_i) - F(theta - mu v_i)) / (2 mu)) v_i`
//!
//! The same direction serves both sides of each pair, evaluations run in a
//! fixed order (direction index ascending, plus before minus, exactly 2n
//! calls), and the reduction is performed in index order, so traces are
//! reproducible. Directions are recorded alongside the estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{perturb, PolicyError, PolicyParams, Sign};

#[derive(Debug, Error)]
pub enum SfError<E: std::error::Error + 'static> {
    #[error("evaluator failed at direction {direction} ({sign:?} side)")]
    Evaluator {
        direction: usize,
        sign: Sign,
        #[source]
        source: E,
    },
    #[error("invalid smoothed-functional config: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Smoothing radius, direction count, and parameter dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfConfig {
    /// Smoothing parameter, in (0, 1].
    pub mu: f64,
    /// Number of sphere directions averaged per estimate.
    pub n: usize,
    /// Parameter dimension.
    pub d: usize,
}

impl SfConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(format!("mu = {} must lie in (0, 1]", self.mu));
        }
        if self.n == 0 {
            return Err("n must be at least 1".into());
        }
        if self.d == 0 {
            return Err("d must be at least 1".into());
        }
        Ok(())
    }
}

/// A gradient estimate together with the randomness that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SfGradient {
    pub gradient: Vec<f64>,
    /// Unit directions in draw order.
    pub directions: Vec<Vec<f64>>,
    /// Paired evaluations (plus side, minus side) per direction.
    pub evaluations: Vec<(f64, f64)>,
}

/// Draws a vector uniformly from the unit sphere in `d` dimensions by
/// normalizing a standard Gaussian sample (redrawn in the measure-zero
/// event that its norm underflows below 1e-12).
pub fn sample_unit_sphere<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// One standard normal draw via Box-Muller.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // u1 in (0, 1], u2 in [0, 1).
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Assembles the two-point estimator from precomputed paired evaluations:
/// `(d/n) sum_i ((plus_i - minus_i) / (2 mu)) v_i`, reduced in index order.
pub fn assemble_gradient(evaluations: &[(f64, f64)], directions: &[Vec<f64>], mu: f64) -> Vec<f64> {
    assert_eq!(evaluations.len(), directions.len());
    let n = directions.len();
    let d = directions[0].len();
    let mut grad = vec![0.0; d];
    for (v, (plus, minus)) in directions.iter().zip(evaluations) {
        let coeff = (plus - minus) / (2.0 * mu);
        for (g, vj) in grad.iter_mut().zip(v) {
            *g += coeff * vj;
        }
    }
    let scale = d as f64 / n as f64;
    for g in &mut grad {
        *g *= scale;
    }
    grad
}

/// Two-point estimate with caller-supplied directions. Used by the
/// optimizer loops (which key their direction substreams per iteration) and
/// by tests that pin directions.
pub fn sf_gradient_with_directions<F, E>(
    mut evaluate: F,
    theta: &PolicyParams,
    mu: f64,
    directions: &[Vec<f64>],
) -> Result<SfGradient, SfError<E>>
where
    F: FnMut(&PolicyParams) -> Result<f64, E>,
    E: std::error::Error + 'static,
{
    let mut evaluations = Vec::with_capacity(directions.len());
    for (i, v) in directions.iter().enumerate() {
        let plus_params = perturb(theta, mu, v, Sign::Plus)?;
        let plus = evaluate(&plus_params).map_err(|source| SfError::Evaluator {
            direction: i,
            sign: Sign::Plus,
            source,
        })?;
        let minus_params = perturb(theta, mu, v, Sign::Minus)?;
        let minus = evaluate(&minus_params).map_err(|source| SfError::Evaluator {
            direction: i,
            sign: Sign::Minus,
            source,
        })?;
        evaluations.push((plus, minus));
    }
    let gradient = assemble_gradient(&evaluations, directions, mu);
    Ok(SfGradient {
        gradient,
        directions: directions.to_vec(),
        evaluations,
    })
}

/// Two-point smoothed-functional gradient estimate with fresh sphere
/// directions drawn from `rng`. Exactly `2 n` evaluator calls.
pub fn sf_gradient_estimate<F, E, R>(
    evaluate: F,
    theta: &PolicyParams,
    cfg: &SfConfig,
    rng: &mut R,
) -> Result<SfGradient, SfError<E>>
where
    F: FnMut(&PolicyParams) -> Result<f64, E>,
    E: std::error::Error + 'static,
    R: Rng,
{
    cfg.validate()
        .map_err(|reason| SfError::InvalidConfig { reason })?;
    if cfg.d != theta.dim() {
        return Err(SfError::InvalidConfig {
            reason: format!("d = {} but theta has dimension {}", cfg.d, theta.dim()),
        });
    }
    let directions: Vec<Vec<f64>> = (0..cfg.n)
        .map(|_| sample_unit_sphere(cfg.d, rng))
        .collect();
    sf_gradient_with_directions(evaluate, theta, cfg.mu, &directions)
}
