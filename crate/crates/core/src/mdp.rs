//! Finite episodic MDPs and trajectory simulation.
//!
//! Episodes start at a fixed start state and end on entering the absorbing
//! terminal state 0, which pays no reward. A hard `horizon_cap` truncates
//! episodes that have not terminated; truncation is flagged on the
//! [`Episode`], never treated as an error, so callers can decide how to
//! account for it. The cumulative discounted reward of any episode is
//! bounded by `m_r = r_max / (1 - gamma)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::ValidationReport;

/// The absorbing terminal state.
pub const TERMINAL_STATE: usize = 0;

/// Tolerance for transition rows summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// One entry of the transition kernel: from (`s`, `a`) move to `next` with
/// probability `p`, collecting reward `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub next: usize,
    pub p: f64,
    pub r: f64,
}

/// Wire/document form of a finite episodic MDP.
///
/// This is exactly the JSON file schema; unknown fields are rejected.
/// Use [`validate_mdp`] for a full report or [`Mdp::compile`] to obtain the
/// validated, indexed form used by the simulator and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub r_max: f64,
    pub gamma: f64,
    pub start_state: usize,
    pub horizon_cap: usize,
    pub transitions: Vec<Transition>,
}

/// Checks every [`MdpSpec`] invariant and reports all violations found.
///
/// Checked: structural field sanity (counts, gamma in (0,1), r_max > 0,
/// index ranges), per-(s, a) probability rows nonnegative and summing to 1
/// within 1e-12 for every non-terminal state, and |reward| <= r_max on every
/// entry. State 0 needs no outgoing transitions; rows attached to it are
/// flagged since the simulator can never use them.
pub fn validate_mdp(spec: &MdpSpec) -> ValidationReport {
    let mut report = ValidationReport::new();
    if spec.num_states == 0 {
        report.violation("num_states must be positive");
    }
    if spec.num_actions == 0 {
        report.violation("num_actions must be positive");
    }
    if !(spec.r_max > 0.0 && spec.r_max.is_finite()) {
        report.violation(format!("r_max = {} must be a positive real", spec.r_max));
    }
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        report.violation(format!("gamma = {} must lie in (0, 1)", spec.gamma));
    }
    if spec.start_state >= spec.num_states {
        report.violation(format!(
            "start_state {} out of range (num_states = {})",
            spec.start_state, spec.num_states
        ));
    }
    if spec.horizon_cap == 0 {
        report.violation("horizon_cap must be positive");
    }
    if spec.num_states == 0 || spec.num_actions == 0 {
        return report;
    }

    let mut row_sums = vec![vec![0.0f64; spec.num_actions]; spec.num_states];
    for t in &spec.transitions {
        if t.s >= spec.num_states || t.a >= spec.num_actions || t.next >= spec.num_states {
            report.violation(format!(
                "transition (s={}, a={}, next={}) references out-of-range indices",
                t.s, t.a, t.next
            ));
            continue;
        }
        if t.s == TERMINAL_STATE {
            report.violation(format!(
                "transition out of absorbing terminal state 0 at (s=0,a={})",
                t.a
            ));
            continue;
        }
        if !(t.p >= 0.0 && t.p.is_finite()) {
            report.violation(format!(
                "negative or non-finite probability {} at (s={},a={})",
                t.p, t.s, t.a
            ));
        }
        if !t.r.is_finite() || t.r.abs() > spec.r_max {
            report.violation(format!(
                "reward bound violated: r = {} with r_max = {} at (s={},a={})",
                t.r, spec.r_max, t.s, t.a
            ));
        }
        row_sums[t.s][t.a] += t.p;
    }
    for (s, row) in row_sums.iter().enumerate().skip(1) {
        for (a, &sum) in row.iter().enumerate() {
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                report.violation(format!("probabilities sum {sum} at (s={s},a={a})"));
            }
        }
    }
    report
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("invalid MDP spec: {}", .0.violations.join("; "))]
    Invalid(ValidationReport),
}

/// Validated, (state, action)-indexed MDP ready for simulation and
/// enumeration.
#[derive(Debug, Clone)]
pub struct Mdp {
    spec: MdpSpec,
    // rows[s][a] holds that pair's transition entries in spec order.
    rows: Vec<Vec<Vec<Transition>>>,
}

impl Mdp {
    /// Validates `spec` and builds the indexed kernel.
    pub fn compile(spec: MdpSpec) -> Result<Self, MdpError> {
        let report = validate_mdp(&spec);
        if !report.is_valid() {
            return Err(MdpError::Invalid(report));
        }
        let mut rows = vec![vec![Vec::new(); spec.num_actions]; spec.num_states];
        for t in &spec.transitions {
            rows[t.s][t.a].push(*t);
        }
        Ok(Self { spec, rows })
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.spec.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.spec.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    pub fn start_state(&self) -> usize {
        self.spec.start_state
    }

    pub fn horizon_cap(&self) -> usize {
        self.spec.horizon_cap
    }

    /// Bound `r_max / (1 - gamma)` on |discounted return|; also the
    /// integration range of the Choquet integral.
    pub fn m_r(&self) -> f64 {
        self.spec.r_max / (1.0 - self.spec.gamma)
    }

    /// Transition entries for a (state, action) pair, in spec order.
    pub fn row(&self, s: usize, a: usize) -> &[Transition] {
        &self.rows[s][a]
    }

    fn sample_transition<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> Transition {
        let row = &self.rows[s][a];
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for t in row {
            cum += t.p;
            if u < cum {
                return *t;
            }
        }
        // Row sums to 1 within tolerance; u landing past the accumulated
        // mass picks the final entry.
        *row.last().expect("validated rows are nonempty")
    }

    /// Samples one episode under `sample_action`, stopping at the terminal
    /// state or after `horizon_cap` steps.
    ///
    /// `sample_action` is consulted only on non-terminal states. The result
    /// is a pure function of (self, sampler, rng state).
    pub fn simulate_episode<R: Rng>(
        &self,
        mut sample_action: impl FnMut(usize, &mut R) -> usize,
        rng: &mut R,
    ) -> Episode {
        let mut steps = Vec::new();
        let mut state = self.spec.start_state;
        for _ in 0..self.spec.horizon_cap {
            if state == TERMINAL_STATE {
                break;
            }
            let action = sample_action(state, rng);
            let t = self.sample_transition(state, action, rng);
            steps.push(Step {
                state,
                action,
                next_state: t.next,
                reward: t.r,
            });
            state = t.next;
        }
        Episode {
            steps,
            terminated: state == TERMINAL_STATE,
        }
    }
}

/// One simulated (state, action, next_state, reward) step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// A simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub steps: Vec<Step>,
    /// True iff the trajectory reached state 0 before the horizon cap;
    /// false marks a truncated episode.
    pub terminated: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Discounted return `sum_t gamma^t r_t` of an episode.
pub fn discounted_return(ep: &Episode, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for step in &ep.steps {
        total += discount * step.reward;
        discount *= gamma;
    }
    total
}
