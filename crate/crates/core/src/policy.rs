//! Tabular softmax policies, parameter perturbation, and importance ratios.
//!
//! The policy family is fixed to a tabular softmax: the parameter vector
//! holds one logit per (state, action) pair, flattened row-major by state,
//! so d = num_states * num_actions. Tabular softmax keeps the gradient and
//! Hessian of log pi bounded, which the smoothed-functional analysis needs,
//! and keeps d small enough for sphere-direction sampling to be practical.
//!
//! Behavior policies are explicit probability tables rather than
//! parameterized policies: the off-policy algorithm treats them as fixed
//! and given.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Episode, Mdp, TERMINAL_STATE};
use crate::report::ValidationReport;

/// Probabilities are floored at this value before dividing in
/// [`importance_ratio`], guarding against denormal underflow.
const MIN_PROB: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy queried at terminal state {state}")]
    TerminalStateQuery { state: usize },
    #[error("state {state} out of range for policy of {num_states} states")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("parameter vector has {got} entries, policy shape needs {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("perturbation direction is not a unit vector (norm = {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("non-finite parameter entry at index {index}")]
    NonFiniteParameter { index: usize },
    #[error(
        "behavior support violation at step {step}: b({action}|{state}) = 0 \
         while target policy puts mass {target_prob} there"
    )]
    SupportViolation {
        step: usize,
        state: usize,
        action: usize,
        target_prob: f64,
    },
    #[error("behavior policy has no row for state {state}")]
    MissingBehaviorRow { state: usize },
    #[error("behavior row for state {state} has {got} entries, expected {expected}")]
    BehaviorRowLength {
        state: usize,
        got: usize,
        expected: usize,
    },
}

/// Policy parameter vector theta. Serialized as a flat JSON array so
/// checkpoints stay trivially diffable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self.0.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(PolicyError::NonFiniteParameter { index }),
            None => Ok(()),
        }
    }
}

/// Perturbation side for the two-point gradient estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Returns theta + sign * mu * v, leaving the input untouched.
///
/// `v` must be a unit vector of matching dimension (norm within 1e-12 of 1).
pub fn perturb(
    params: &PolicyParams,
    mu: f64,
    v: &[f64],
    sign: Sign,
) -> Result<PolicyParams, PolicyError> {
    if v.len() != params.dim() {
        return Err(PolicyError::DimensionMismatch {
            got: v.len(),
            expected: params.dim(),
        });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(PolicyError::NonUnitDirection { norm });
    }
    let f = sign.factor() * mu;
    Ok(PolicyParams(
        params
            .0
            .iter()
            .zip(v)
            .map(|(theta, dir)| theta + f * dir)
            .collect(),
    ))
}

/// Shape of the tabular softmax family: which block of theta belongs to
/// which state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularSoftmax {
    pub num_states: usize,
    pub num_actions: usize,
}

impl TabularSoftmax {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
        }
    }

    pub fn for_mdp(mdp: &Mdp) -> Self {
        Self::new(mdp.num_states(), mdp.num_actions())
    }

    /// Parameter dimension d = num_states * num_actions.
    pub fn dim(&self) -> usize {
        self.num_states * self.num_actions
    }

    fn check_state(&self, params: &PolicyParams, s: usize) -> Result<(), PolicyError> {
        if params.dim() != self.dim() {
            return Err(PolicyError::DimensionMismatch {
                got: params.dim(),
                expected: self.dim(),
            });
        }
        if s >= self.num_states {
            return Err(PolicyError::StateOutOfRange {
                state: s,
                num_states: self.num_states,
            });
        }
        if s == TERMINAL_STATE {
            return Err(PolicyError::TerminalStateQuery { state: s });
        }
        Ok(())
    }

    /// Softmax over the theta-block of state `s`, computed with
    /// max-subtraction for overflow safety.
    pub fn action_probabilities(
        &self,
        params: &PolicyParams,
        s: usize,
    ) -> Result<Vec<f64>, PolicyError> {
        self.check_state(params, s)?;
        let block = &params.0[s * self.num_actions..(s + 1) * self.num_actions];
        let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = block.iter().map(|x| (x - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Ok(probs)
    }

    /// Target-policy probability of a single action.
    pub fn action_probability(
        &self,
        params: &PolicyParams,
        s: usize,
        a: usize,
    ) -> Result<f64, PolicyError> {
        Ok(self.action_probabilities(params, s)?[a])
    }

    /// Draws an action from the softmax distribution at `s`.
    pub fn sample_action<R: Rng>(
        &self,
        params: &PolicyParams,
        s: usize,
        rng: &mut R,
    ) -> Result<usize, PolicyError> {
        let probs = self.action_probabilities(params, s)?;
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (a, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return Ok(a);
            }
        }
        Ok(probs.len() - 1)
    }
}

/// Explicit behavior policy: one probability row per non-terminal state.
/// Serialized as a JSON map from state id to probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorPolicy {
    probs: BTreeMap<usize, Vec<f64>>,
}

impl BehaviorPolicy {
    pub fn new(probs: BTreeMap<usize, Vec<f64>>) -> Self {
        Self { probs }
    }

    /// Uniform action distribution on every non-terminal state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let row = vec![1.0 / num_actions as f64; num_actions];
        Self {
            probs: (1..num_states).map(|s| (s, row.clone())).collect(),
        }
    }

    /// Snapshot of the target softmax policy as an explicit table.
    pub fn from_softmax(
        shape: &TabularSoftmax,
        params: &PolicyParams,
    ) -> Result<Self, PolicyError> {
        let mut probs = BTreeMap::new();
        for s in 1..shape.num_states {
            probs.insert(s, shape.action_probabilities(params, s)?);
        }
        Ok(Self { probs })
    }

    pub fn row(&self, s: usize) -> Option<&[f64]> {
        self.probs.get(&s).map(Vec::as_slice)
    }

    pub fn prob(&self, s: usize, a: usize) -> Result<f64, PolicyError> {
        let row = self
            .probs
            .get(&s)
            .ok_or(PolicyError::MissingBehaviorRow { state: s })?;
        row.get(a)
            .copied()
            .ok_or(PolicyError::BehaviorRowLength {
                state: s,
                got: row.len(),
                expected: a + 1,
            })
    }

    pub fn sample_action<R: Rng>(&self, s: usize, rng: &mut R) -> Result<usize, PolicyError> {
        let row = self
            .probs
            .get(&s)
            .ok_or(PolicyError::MissingBehaviorRow { state: s })?;
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (a, p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                return Ok(a);
            }
        }
        Ok(row.len() - 1)
    }

    /// Checks row coverage, lengths, nonnegativity, and row sums against an
    /// MDP's shape.
    pub fn validate(&self, num_states: usize, num_actions: usize) -> ValidationReport {
        let mut report = ValidationReport::new();
        for s in 1..num_states {
            match self.probs.get(&s) {
                None => report.violation(format!("no probability row for state {s}")),
                Some(row) => {
                    if row.len() != num_actions {
                        report.violation(format!(
                            "row for state {s} has {} entries, expected {num_actions}",
                            row.len()
                        ));
                        continue;
                    }
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        report.violation(format!(
                            "row for state {s} has negative or non-finite entries"
                        ));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        report.violation(format!("probabilities sum {sum} at state {s}"));
                    }
                }
            }
        }
        for s in self.probs.keys() {
            if *s == TERMINAL_STATE || *s >= num_states {
                report.violation(format!("row for state {s} is outside 1..{num_states}"));
            }
        }
        report
    }
}

/// Importance sampling ratio psi of an episode: the product over its steps
/// of target over behavior action probabilities.
///
/// A target probability of exactly zero yields psi = 0, which is legal;
/// behavior probability zero under positive target mass is a support
/// violation and surfaces the offending (step, state, action).
pub fn importance_ratio(
    ep: &Episode,
    shape: &TabularSoftmax,
    target: &PolicyParams,
    behavior: &BehaviorPolicy,
) -> Result<f64, PolicyError> {
    let mut ratio = 1.0;
    for (step, s) in ep.steps.iter().enumerate() {
        let pt = shape.action_probability(target, s.state, s.action)?;
        let pb = behavior.prob(s.state, s.action)?;
        if pb <= 0.0 {
            if pt > 0.0 {
                return Err(PolicyError::SupportViolation {
                    step,
                    state: s.state,
                    action: s.action,
                    target_prob: pt,
                });
            }
            return Ok(0.0);
        }
        if pt == 0.0 {
            return Ok(0.0);
        }
        ratio *= pt / pb.max(MIN_PROB);
    }
    Ok(ratio)
}
