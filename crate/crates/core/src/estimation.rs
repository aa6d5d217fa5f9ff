//! DRM estimation from return samples.
//!
//! Two routes to the same number, kept deliberately independent so one can
//! check the other:
//!
//! 1. Build a right-continuous step CDF from the samples — the empirical
//!    distribution function on-policy, or the importance-weighted,
//!    clipped-at-one variant off-policy — and push it through the Choquet
//!    integral
//!    `int_{-m_r}^{0} (g(1 - F(x)) - 1) dx + int_{0}^{m_r} g(1 - F(x)) dx`,
//!    evaluated in closed form over the step segments.
//! 2. Evaluate the order-statistics formulas directly: on-policy
//!    `sum_i R_(i) (g(1 - (i-1)/m) - g(1 - i/m))`, and off-policy the same
//!    telescoping with the jump positions replaced by the clipped partial
//!    sums of the importance ratios, where each ratio travels with its
//!    return's rank.
//!
//! The two routes agree to float precision on any batch; the equivalence is
//! enforced by tests, not by one path calling the other.
//!
//! With the identity distortion the on-policy estimator collapses to the
//! sample mean, and unit importance ratios collapse the off-policy estimator
//! to the on-policy one bit-for-bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::Distortion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("empty return batch")]
    EmptyBatch,
    #[error("return at index {index} is not finite ({value})")]
    NonFiniteReturn { index: usize, value: f64 },
    #[error("weight at index {index} is negative or non-finite ({value})")]
    InvalidWeight { index: usize, value: f64 },
    #[error("{returns} returns but {weights} weights")]
    LengthMismatch { returns: usize, weights: usize },
    #[error("edf expects an unweighted batch")]
    WeightsPresent,
    #[error("weighted_cdf expects a weighted batch")]
    WeightsMissing,
    #[error("invalid step CDF: {reason}")]
    InvalidCdf { reason: String },
}

/// A batch of per-episode discounted returns, optionally paired with the
/// importance ratios of the episodes that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnBatch {
    returns: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl ReturnBatch {
    pub fn on_policy(returns: Vec<f64>) -> Result<Self, EstimationError> {
        check_returns(&returns)?;
        Ok(Self {
            returns,
            weights: None,
        })
    }

    pub fn off_policy(returns: Vec<f64>, weights: Vec<f64>) -> Result<Self, EstimationError> {
        check_returns(&returns)?;
        if weights.len() != returns.len() {
            return Err(EstimationError::LengthMismatch {
                returns: returns.len(),
                weights: weights.len(),
            });
        }
        check_weights(&weights)?;
        Ok(Self {
            returns,
            weights: Some(weights),
        })
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

fn check_returns(returns: &[f64]) -> Result<(), EstimationError> {
    for (index, &value) in returns.iter().enumerate() {
        if !value.is_finite() {
            return Err(EstimationError::NonFiniteReturn { index, value });
        }
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<(), EstimationError> {
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(EstimationError::InvalidWeight { index, value });
        }
    }
    Ok(())
}

/// A right-continuous step function on [-m_r, m_r] representing a CDF:
/// `values[i]` applies on `[breakpoints[i], breakpoints[i+1])` and the final
/// value (exactly 1) from the last breakpoint onward. Below the first
/// breakpoint the CDF is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    m_r: f64,
}

impl StepCdf {
    /// Validates the step-function invariants: strictly increasing
    /// breakpoints inside [-m_r, m_r], nondecreasing values in [0, 1], and a
    /// final value of exactly 1.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, m_r: f64) -> Result<Self, EstimationError> {
        let invalid = |reason: String| EstimationError::InvalidCdf { reason };
        if !(m_r > 0.0 && m_r.is_finite()) {
            return Err(invalid(format!("m_r = {m_r} must be a positive real")));
        }
        if breakpoints.is_empty() {
            return Err(invalid("no breakpoints".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(invalid(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        let range_tol = 1e-9 * (1.0 + m_r);
        for (i, b) in breakpoints.iter().enumerate() {
            if !b.is_finite() || b.abs() > m_r + range_tol {
                return Err(invalid(format!("breakpoint {b} outside [-{m_r}, {m_r}]")));
            }
            if i > 0 && *b <= breakpoints[i - 1] {
                return Err(invalid(format!(
                    "breakpoints not strictly increasing at index {i}"
                )));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !(*v >= 0.0 && *v <= 1.0) {
                return Err(invalid(format!("value {v} outside [0, 1] at index {i}")));
            }
            if i > 0 && *v < values[i - 1] {
                return Err(invalid(format!("values decrease at index {i}")));
            }
        }
        if *values.last().expect("nonempty") != 1.0 {
            return Err(invalid(format!(
                "final value must be exactly 1, got {}",
                values.last().unwrap()
            )));
        }
        Ok(Self {
            breakpoints,
            values,
            m_r,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m_r(&self) -> f64 {
        self.m_r
    }

    /// CDF value at `x` (right-continuous).
    pub fn value_at(&self, x: f64) -> f64 {
        match self.breakpoints.partition_point(|b| *b <= x) {
            0 => 0.0,
            i => self.values[i - 1],
        }
    }
}

/// Empirical distribution function of an unweighted batch: jumps of 1/m at
/// each sample, equal samples merged into a single breakpoint carrying the
/// cumulative count.
pub fn edf(batch: &ReturnBatch, m_r: f64) -> Result<StepCdf, EstimationError> {
    if batch.weights.is_some() {
        return Err(EstimationError::WeightsPresent);
    }
    if batch.is_empty() {
        return Err(EstimationError::EmptyBatch);
    }
    let mut sorted = batch.returns.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let r = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == r {
            j += 1;
        }
        breakpoints.push(r);
        values.push(j as f64 / m);
        i = j;
    }
    // j == m on the last group, so the final value is exactly 1.
    StepCdf::new(breakpoints, values, m_r)
}

/// Importance-weighted CDF estimate of a weighted batch.
///
/// At the i-th order statistic the value is `min(1, (1/m) sum_{k<=i}
/// psi_(k))`, where each ratio travels with its return's rank (stable sort;
/// ties keep input order). The raw weighted sum can exceed 1, hence the
/// clip, and the value at and above the top order statistic is forced to 1.
pub fn weighted_cdf(batch: &ReturnBatch, m_r: f64) -> Result<StepCdf, EstimationError> {
    let weights = batch.weights().ok_or(EstimationError::WeightsMissing)?;
    if batch.is_empty() {
        return Err(EstimationError::EmptyBatch);
    }
    let returns = batch.returns();
    let m = returns.len() as f64;
    let order = sorted_order(returns);
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let mut cum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let r = returns[order[i]];
        let mut j = i;
        while j < order.len() && returns[order[j]] == r {
            cum += weights[order[j]];
            j += 1;
        }
        breakpoints.push(r);
        values.push((cum / m).min(1.0));
        i = j;
    }
    *values.last_mut().expect("nonempty") = 1.0;
    StepCdf::new(breakpoints, values, m_r)
}

/// Stable ordering of indices by ascending return.
fn sorted_order(returns: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..returns.len()).collect();
    order.sort_by(|&i, &j| returns[i].total_cmp(&returns[j]));
    order
}

/// Exact Choquet integral of a step CDF under the distortion `g`:
/// `int_{-m_r}^{0} (g(1 - F(x)) - 1) dx + int_{0}^{m_r} g(1 - F(x)) dx`,
/// summed in closed form over the constant segments (no quadrature error
/// beyond float rounding).
pub fn choquet_drm(cdf: &StepCdf, g: &Distortion) -> f64 {
    let m_r = cdf.m_r;
    let k = cdf.breakpoints.len();
    let mut acc = 0.0;
    for i in 0..=k {
        let lo = if i == 0 { -m_r } else { cdf.breakpoints[i - 1] };
        let hi = if i == k { m_r } else { cdf.breakpoints[i] };
        if hi <= lo {
            continue;
        }
        let f = if i == 0 { 0.0 } else { cdf.values[i - 1] };
        let gv = g.eval(1.0 - f).expect("1 - F lies in [0, 1]");
        let neg_len = (hi.min(0.0) - lo.min(0.0)).max(0.0);
        let pos_len = (hi.max(0.0) - lo.max(0.0)).max(0.0);
        acc += neg_len * (gv - 1.0) + pos_len * gv;
    }
    acc
}

/// On-policy DRM estimate via order statistics:
/// `sum_i R_(i) (g(1 - (i-1)/m) - g(1 - i/m))`.
///
/// Agrees with `choquet_drm(edf(..))` to float precision; with the identity
/// distortion the coefficients telescope to 1/m and the estimate is the
/// sample mean.
pub fn drm_onpolicy_estimate(returns: &[f64], g: &Distortion) -> Result<f64, EstimationError> {
    if returns.is_empty() {
        return Err(EstimationError::EmptyBatch);
    }
    check_returns(returns)?;
    let mut sorted = returns.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut acc = 0.0;
    for (i, r) in sorted.iter().enumerate() {
        let upper = g.eval(1.0 - i as f64 / m).expect("argument in [0, 1]");
        let lower = g
            .eval(1.0 - (i as f64 + 1.0) / m)
            .expect("argument in [0, 1]");
        acc += r * (upper - lower);
    }
    Ok(acc)
}

/// Off-policy DRM estimate via order statistics with importance ratios:
///
/// `R_(1) + sum_{i>=2} R_(i) g(1 - min(1, S_{i-1}/m))
///        - sum_{i<=m-1} R_(i) g(1 - min(1, S_i/m))`
///
/// where `S_i` is the running sum of the ratios in return order. Agrees
/// with `choquet_drm(weighted_cdf(..))` to float precision, and reduces
/// bit-for-bit to the on-policy estimate when all ratios are 1.
pub fn drm_offpolicy_estimate(
    returns: &[f64],
    weights: &[f64],
    g: &Distortion,
) -> Result<f64, EstimationError> {
    if returns.is_empty() {
        return Err(EstimationError::EmptyBatch);
    }
    check_returns(returns)?;
    if weights.len() != returns.len() {
        return Err(EstimationError::LengthMismatch {
            returns: returns.len(),
            weights: weights.len(),
        });
    }
    check_weights(weights)?;
    let m = returns.len();
    let mf = m as f64;
    let order = sorted_order(returns);
    let mut acc = 0.0;
    let mut cum = 0.0;
    for (pos, &orig) in order.iter().enumerate() {
        let upper = if pos == 0 {
            1.0
        } else {
            g.eval(1.0 - (cum / mf).min(1.0)).expect("argument in [0, 1]")
        };
        cum += weights[orig];
        let lower = if pos == m - 1 {
            0.0
        } else {
            g.eval(1.0 - (cum / mf).min(1.0)).expect("argument in [0, 1]")
        };
        acc += returns[orig] * (upper - lower);
    }
    Ok(acc)
}
