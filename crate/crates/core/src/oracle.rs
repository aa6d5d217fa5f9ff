//! Exact ground truth on desk-scale MDPs.
//!
//! Enumerates every (action, next-state) path from the start state to build
//! the exact return distribution under a softmax policy, from which the
//! exact DRM, central-difference gradients, and the uniform importance-ratio
//! bound follow. Enumeration refuses rather than approximates: a path budget
//! bounds the tree walk, and the exact DRM is only reported when the
//! distribution is (numerically) complete, i.e. essentially no probability
//! mass is still in flight at the horizon cap.

use thiserror::Error;

use crate::distortion::Distortion;
use crate::estimation::{choquet_drm, EstimationError, StepCdf};
use crate::mdp::{Mdp, TERMINAL_STATE};
use crate::policy::{BehaviorPolicy, PolicyError, PolicyParams, TabularSoftmax};

/// Default cap on enumerated paths.
pub const DEFAULT_PATH_BUDGET: usize = 10_000_000;

/// Returns closer than this are merged into one atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Residual mass above this makes the exact DRM unavailable.
pub const MAX_RESIDUAL_FOR_EXACT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("path budget of {budget} exceeded; enumeration refused")]
    PathBudgetExceeded { budget: usize },
    #[error(
        "residual probability mass {residual} above {MAX_RESIDUAL_FOR_EXACT}: \
         the return CDF is not fully known, refusing to report an exact DRM"
    )]
    ResidualMass { residual: f64 },
    #[error("invalid return distribution: {reason}")]
    InvalidDistribution { reason: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// The exact distribution of the discounted return: point masses plus the
/// probability of paths still alive at the horizon cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactReturnDistribution {
    atoms: Vec<(f64, f64)>,
    residual_mass: f64,
    m_r: f64,
}

impl ExactReturnDistribution {
    /// Sorts, merges returns within [`ATOM_MERGE_TOL`], and validates that
    /// probabilities are positive, total mass is 1 within 1e-10, and all
    /// returns lie within [-m_r, m_r].
    pub fn new(
        mut atoms: Vec<(f64, f64)>,
        residual_mass: f64,
        m_r: f64,
    ) -> Result<Self, OracleError> {
        let invalid = |reason: String| OracleError::InvalidDistribution { reason };
        if !(0.0..=1.0).contains(&residual_mass) {
            return Err(invalid(format!("residual mass {residual_mass} outside [0, 1]")));
        }
        for &(r, p) in &atoms {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid(format!("atom probability {p} not positive")));
            }
            if !r.is_finite() || r.abs() > m_r * (1.0 + 1e-9) + 1e-9 {
                return Err(invalid(format!("return {r} outside [-{m_r}, {m_r}]")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (r, p) in atoms {
            match merged.last_mut() {
                Some(last) if r - last.0 <= ATOM_MERGE_TOL => last.1 += p,
                _ => merged.push((r, p)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum::<f64>() + residual_mass;
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("total mass {total} differs from 1")));
        }
        Ok(Self {
            atoms: merged,
            residual_mass,
            m_r,
        })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn residual_mass(&self) -> f64 {
        self.residual_mass
    }

    pub fn m_r(&self) -> f64 {
        self.m_r
    }

    /// Probability-weighted mean return, normalized over the terminated
    /// mass.
    pub fn mean(&self) -> f64 {
        let mass: f64 = self.atoms.iter().map(|a| a.1).sum();
        self.atoms.iter().map(|(r, p)| r * p).sum::<f64>() / mass
    }
}

/// Depth-first enumeration of the return distribution of the softmax policy
/// `theta` up to `horizon_cap` steps. Paths still alive at the cap
/// contribute to the residual mass. Refuses once more than `path_budget`
/// paths (leaves) have been closed.
pub fn enumerate_return_distribution(
    mdp: &Mdp,
    theta: &PolicyParams,
    horizon_cap: usize,
    path_budget: usize,
) -> Result<ExactReturnDistribution, OracleError> {
    let shape = TabularSoftmax::for_mdp(mdp);
    let mut action_probs = vec![Vec::new(); mdp.num_states()];
    for (s, probs) in action_probs.iter_mut().enumerate().skip(1) {
        *probs = shape.action_probabilities(theta, s)?;
    }

    struct Frame {
        state: usize,
        depth: usize,
        prob: f64,
        ret: f64,
        discount: f64,
    }

    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut residual = 0.0;
    let mut paths = 0usize;
    let mut stack = vec![Frame {
        state: mdp.start_state(),
        depth: 0,
        prob: 1.0,
        ret: 0.0,
        discount: 1.0,
    }];
    while let Some(frame) = stack.pop() {
        if frame.state == TERMINAL_STATE || frame.depth == horizon_cap {
            paths += 1;
            if paths > path_budget {
                return Err(OracleError::PathBudgetExceeded {
                    budget: path_budget,
                });
            }
            if frame.state == TERMINAL_STATE {
                atoms.push((frame.ret, frame.prob));
            } else {
                residual += frame.prob;
            }
            continue;
        }
        for (a, &pa) in action_probs[frame.state].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for t in mdp.row(frame.state, a) {
                if t.p == 0.0 {
                    continue;
                }
                stack.push(Frame {
                    state: t.next,
                    depth: frame.depth + 1,
                    prob: frame.prob * pa * t.p,
                    ret: frame.ret + frame.discount * t.r,
                    discount: frame.discount * mdp.gamma(),
                });
            }
        }
    }
    ExactReturnDistribution::new(atoms, residual, mdp.m_r())
}

/// Exact DRM of an enumerated distribution: builds the exact step CDF from
/// the atoms and evaluates the Choquet integral. Refuses when residual mass
/// exceeds [`MAX_RESIDUAL_FOR_EXACT`], since the true CDF is then unknown.
pub fn exact_drm(dist: &ExactReturnDistribution, g: &Distortion) -> Result<f64, OracleError> {
    if dist.residual_mass > MAX_RESIDUAL_FOR_EXACT {
        return Err(OracleError::ResidualMass {
            residual: dist.residual_mass,
        });
    }
    let total: f64 = dist.atoms.iter().map(|a| a.1).sum();
    let mut breakpoints = Vec::with_capacity(dist.atoms.len());
    let mut values = Vec::with_capacity(dist.atoms.len());
    let mut cum = 0.0;
    for &(r, p) in &dist.atoms {
        cum += p;
        breakpoints.push(r);
        values.push(cum / total);
    }
    let cdf = StepCdf::new(breakpoints, values, dist.m_r)?;
    Ok(choquet_drm(&cdf, g))
}

/// Central-difference gradient of the exact DRM in theta:
/// `(rho(theta + h e_j) - rho(theta - h e_j)) / (2h)` per coordinate.
pub fn finite_difference_gradient(
    mdp: &Mdp,
    theta: &PolicyParams,
    g: &Distortion,
    h: f64,
    path_budget: usize,
) -> Result<Vec<f64>, OracleError> {
    let mut grad = Vec::with_capacity(theta.dim());
    for j in 0..theta.dim() {
        let mut plus = theta.clone();
        plus.0[j] += h;
        let mut minus = theta.clone();
        minus.0[j] -= h;
        let rho_plus = exact_drm(
            &enumerate_return_distribution(mdp, &plus, mdp.horizon_cap(), path_budget)?,
            g,
        )?;
        let rho_minus = exact_drm(
            &enumerate_return_distribution(mdp, &minus, mdp.horizon_cap(), path_budget)?,
            g,
        )?;
        grad.push((rho_plus - rho_minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Default step for [`finite_difference_gradient`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Maximum importance sampling ratio over every path the behavior policy
/// can produce within `horizon_cap` steps — the uniform bound `M_s` on psi.
///
/// Actions with zero behavior probability cannot occur in behavior episodes
/// and are skipped; truncated paths count with the ratio accumulated up to
/// the cap.
pub fn max_importance_ratio(
    mdp: &Mdp,
    theta: &PolicyParams,
    behavior: &BehaviorPolicy,
    horizon_cap: usize,
    path_budget: usize,
) -> Result<f64, OracleError> {
    let shape = TabularSoftmax::for_mdp(mdp);
    let mut action_probs = vec![Vec::new(); mdp.num_states()];
    for (s, probs) in action_probs.iter_mut().enumerate().skip(1) {
        *probs = shape.action_probabilities(theta, s)?;
    }

    struct Frame {
        state: usize,
        depth: usize,
        ratio: f64,
    }

    let mut max_ratio = f64::NEG_INFINITY;
    let mut paths = 0usize;
    let mut stack = vec![Frame {
        state: mdp.start_state(),
        depth: 0,
        ratio: 1.0,
    }];
    while let Some(frame) = stack.pop() {
        if frame.state == TERMINAL_STATE || frame.depth == horizon_cap {
            paths += 1;
            if paths > path_budget {
                return Err(OracleError::PathBudgetExceeded {
                    budget: path_budget,
                });
            }
            max_ratio = max_ratio.max(frame.ratio);
            continue;
        }
        for (a, &pa) in action_probs[frame.state].iter().enumerate() {
            let pb = behavior.prob(frame.state, a)?;
            if pb == 0.0 {
                continue;
            }
            let ratio = frame.ratio * pa / pb;
            // Distinct next states share the action's ratio factor; only
            // reachability matters below, so visit each support branch.
            for t in mdp.row(frame.state, a) {
                if t.p == 0.0 {
                    continue;
                }
                stack.push(Frame {
                    state: t.next,
                    depth: frame.depth + 1,
                    ratio,
                });
            }
        }
    }
    Ok(max_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::DistortionKind;
    use crate::mdp::{MdpSpec, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_path_mdp() -> Mdp {
        Mdp::compile(MdpSpec {
            num_states: 2,
            num_actions: 1,
            r_max: 1.0,
            gamma: 0.9,
            start_state: 1,
            horizon_cap: 5,
            transitions: vec![Transition { s: 1, a: 0, next: 0, p: 1.0, r: 1.0 }],
        })
        .unwrap()
    }

    fn bandit() -> Mdp {
        Mdp::compile(MdpSpec {
            num_states: 2,
            num_actions: 2,
            r_max: 1.0,
            gamma: 0.9,
            start_state: 1,
            horizon_cap: 2,
            transitions: vec![
                Transition { s: 1, a: 0, next: 0, p: 1.0, r: 0.0 },
                Transition { s: 1, a: 1, next: 0, p: 1.0, r: 1.0 },
            ],
        })
        .unwrap()
    }

    #[test]
    fn deterministic_single_path() {
        let mdp = single_path_mdp();
        let dist =
            enumerate_return_distribution(&mdp, &PolicyParams::zeros(2), 5, 1000).unwrap();
        assert_eq!(dist.atoms(), &[(1.0, 1.0)]);
        assert_eq!(dist.residual_mass(), 0.0);
    }

    #[test]
    fn uniform_bandit_has_two_half_atoms() {
        let dist =
            enumerate_return_distribution(&bandit(), &PolicyParams::zeros(4), 2, 1000).unwrap();
        assert_eq!(dist.atoms().len(), 2);
        assert!((dist.atoms()[0].0 - 0.0).abs() < 1e-15);
        assert!((dist.atoms()[0].1 - 0.5).abs() < 1e-12);
        assert!((dist.atoms()[1].0 - 1.0).abs() < 1e-15);
        assert!((dist.atoms()[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stochastic_chain_matches_monte_carlo() {
        let mdp = Mdp::compile(MdpSpec {
            num_states: 3,
            num_actions: 2,
            r_max: 1.0,
            gamma: 0.5,
            start_state: 1,
            horizon_cap: 4,
            transitions: vec![
                Transition { s: 1, a: 0, next: 2, p: 0.7, r: 0.2 },
                Transition { s: 1, a: 0, next: 0, p: 0.3, r: -0.4 },
                Transition { s: 1, a: 1, next: 2, p: 0.4, r: 1.0 },
                Transition { s: 1, a: 1, next: 0, p: 0.6, r: 0.0 },
                Transition { s: 2, a: 0, next: 0, p: 1.0, r: 0.5 },
                Transition { s: 2, a: 1, next: 0, p: 0.5, r: -1.0 },
                Transition { s: 2, a: 1, next: 0, p: 0.5, r: 1.0 },
            ],
        })
        .unwrap();
        let theta = PolicyParams(vec![0.0, 0.0, 0.3, -0.2, -0.5, 0.8]);
        let dist = enumerate_return_distribution(&mdp, &theta, 4, 100_000).unwrap();
        assert!(dist.residual_mass() == 0.0);

        let shape = TabularSoftmax::for_mdp(&mdp);
        let n = 1_000_000usize;
        let mut counts = vec![0usize; dist.atoms().len()];
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..n {
            let ep = mdp.simulate_episode(
                |s, rng| shape.sample_action(&theta, s, rng).expect("non-terminal"),
                &mut rng,
            );
            let ret = crate::mdp::discounted_return(&ep, mdp.gamma());
            let idx = dist
                .atoms()
                .iter()
                .position(|(r, _)| (r - ret).abs() < 1e-9)
                .expect("every simulated return is an enumerated atom");
            counts[idx] += 1;
        }
        for (idx, &(_, p)) in dist.atoms().iter().enumerate() {
            let freq = counts[idx] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "atom {idx}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn exact_drm_of_point_mass() {
        let dist = ExactReturnDistribution::new(vec![(2.5, 1.0)], 0.0, 10.0).unwrap();
        for g in [
            Distortion::identity(),
            Distortion::new(DistortionKind::DualPower, 2.0).unwrap(),
        ] {
            assert_eq!(exact_drm(&dist, &g).unwrap(), 2.5);
        }
    }

    #[test]
    fn exact_drm_two_atoms() {
        let dist =
            ExactReturnDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)], 0.0, 10.0).unwrap();
        assert!((exact_drm(&dist, &Distortion::identity()).unwrap() - 0.5).abs() < 1e-12);
        let dp = Distortion::new(DistortionKind::DualPower, 2.0).unwrap();
        assert!((exact_drm(&dist, &dp).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_drm_equals_atom_weighted_mean() {
        let dist = ExactReturnDistribution::new(
            vec![(-1.5, 0.25), (0.2, 0.4), (3.0, 0.35)],
            0.0,
            10.0,
        )
        .unwrap();
        let drm = exact_drm(&dist, &Distortion::identity()).unwrap();
        assert!((drm - dist.mean()).abs() < 1e-12);
    }

    #[test]
    fn exact_drm_invariant_to_atom_order_and_splitting() {
        let g = Distortion::new(DistortionKind::DualPower, 2.0).unwrap();
        let a = ExactReturnDistribution::new(vec![(1.0, 0.5), (-1.0, 0.5)], 0.0, 5.0).unwrap();
        let b = ExactReturnDistribution::new(vec![(-1.0, 0.5), (1.0, 0.5)], 0.0, 5.0).unwrap();
        let c = ExactReturnDistribution::new(
            vec![(1.0, 0.25), (-1.0, 0.5), (1.0, 0.25)],
            0.0,
            5.0,
        )
        .unwrap();
        let va = exact_drm(&a, &g).unwrap();
        assert_eq!(va, exact_drm(&b, &g).unwrap());
        assert_eq!(va, exact_drm(&c, &g).unwrap());
    }

    #[test]
    fn residual_mass_refusal() {
        // Self-loop never terminates within the cap.
        let mdp = Mdp::compile(MdpSpec {
            num_states: 2,
            num_actions: 1,
            r_max: 1.0,
            gamma: 0.9,
            start_state: 1,
            horizon_cap: 3,
            transitions: vec![Transition { s: 1, a: 0, next: 1, p: 1.0, r: 0.1 }],
        })
        .unwrap();
        let dist =
            enumerate_return_distribution(&mdp, &PolicyParams::zeros(2), 3, 1000).unwrap();
        assert!((dist.residual_mass() - 1.0).abs() < 1e-12);
        assert!(matches!(
            exact_drm(&dist, &Distortion::identity()),
            Err(OracleError::ResidualMass { .. })
        ));
    }

    #[test]
    fn path_budget_refusal() {
        let err = enumerate_return_distribution(&bandit(), &PolicyParams::zeros(4), 2, 1)
            .unwrap_err();
        assert_eq!(err, OracleError::PathBudgetExceeded { budget: 1 });
    }

    #[test]
    fn symmetric_bandit_gradient_is_zero() {
        // Both arms pay the same reward, so the DRM is constant in theta.
        let mdp = Mdp::compile(MdpSpec {
            num_states: 2,
            num_actions: 2,
            r_max: 1.0,
            gamma: 0.9,
            start_state: 1,
            horizon_cap: 2,
            transitions: vec![
                Transition { s: 1, a: 0, next: 0, p: 1.0, r: 0.5 },
                Transition { s: 1, a: 1, next: 0, p: 1.0, r: 0.5 },
            ],
        })
        .unwrap();
        let grad = finite_difference_gradient(
            &mdp,
            &PolicyParams::zeros(4),
            &Distortion::identity(),
            1e-5,
            1000,
        )
        .unwrap();
        for gj in grad {
            assert!(gj.abs() < 1e-6);
        }
    }

    #[test]
    fn bandit_gradient_points_toward_better_arm() {
        let grad = finite_difference_gradient(
            &bandit(),
            &PolicyParams::zeros(4),
            &Distortion::identity(),
            1e-5,
            1000,
        )
        .unwrap();
        // Arm 1 pays 1, arm 0 pays 0: raising the arm-1 logit helps.
        assert!(grad[3] > 1e-3);
        assert!(grad[2] < -1e-3);
    }

    #[test]
    fn matching_behavior_gives_unit_ratio_bound() {
        let mdp = bandit();
        let theta = PolicyParams(vec![0.0, 0.0, 0.4, -0.1]);
        let shape = TabularSoftmax::for_mdp(&mdp);
        let behavior = BehaviorPolicy::from_softmax(&shape, &theta).unwrap();
        let m_s = max_importance_ratio(&mdp, &theta, &behavior, 2, 1000).unwrap();
        assert!((m_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_ratio_bound_hand_evaluated() {
        let mdp = bandit();
        // pi = (0.75, 0.25) against uniform b: max factor 1.5.
        let theta = PolicyParams(vec![0.0, 0.0, 3f64.ln(), 0.0]);
        let behavior = BehaviorPolicy::uniform(2, 2);
        let m_s = max_importance_ratio(&mdp, &theta, &behavior, 2, 1000).unwrap();
        assert!((m_s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn simulated_ratios_never_exceed_the_bound() {
        let mdp = Mdp::compile(MdpSpec {
            num_states: 3,
            num_actions: 2,
            r_max: 1.0,
            gamma: 0.8,
            start_state: 1,
            horizon_cap: 6,
            transitions: vec![
                Transition { s: 1, a: 0, next: 2, p: 0.5, r: 0.1 },
                Transition { s: 1, a: 0, next: 0, p: 0.5, r: 0.2 },
                Transition { s: 1, a: 1, next: 2, p: 1.0, r: -0.3 },
                Transition { s: 2, a: 0, next: 0, p: 1.0, r: 0.4 },
                Transition { s: 2, a: 1, next: 1, p: 0.6, r: 0.0 },
                Transition { s: 2, a: 1, next: 0, p: 0.4, r: 1.0 },
            ],
        })
        .unwrap();
        let theta = PolicyParams(vec![0.0, 0.0, 0.9, -0.6, 0.2, 1.1]);
        let behavior = BehaviorPolicy::uniform(3, 2);
        let shape = TabularSoftmax::for_mdp(&mdp);
        let m_s = max_importance_ratio(&mdp, &theta, &behavior, 6, 1_000_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100_000 {
            let ep = mdp.simulate_episode(
                |s, rng| behavior.sample_action(s, rng).expect("row exists"),
                &mut rng,
            );
            let psi =
                crate::policy::importance_ratio(&ep, &shape, &theta, &behavior).unwrap();
            assert!(psi <= m_s + 1e-9, "psi {psi} exceeds M_s {m_s}");
        }
    }
}
