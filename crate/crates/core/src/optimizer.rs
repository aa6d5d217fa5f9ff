//! DRM gradient-ascent loops, on-policy and off-policy.
//!
//! Both algorithms climb `theta_{k+1} = theta_k + alpha * grad_est` where
//! the gradient estimate is the two-point smoothed-functional estimator fed
//! with DRM estimates at the perturbed policies:
//!
//! * on-policy: per iteration, for each of n directions, simulate m fresh
//!   episodes under each of the two perturbed policies and estimate the DRM
//!   from their returns (2 m n episodes per iteration);
//! * off-policy: per iteration, simulate m episodes under the fixed
//!   behavior policy once, then reweight those same episodes by importance
//!   ratios for every perturbed policy (m episodes per iteration, however
//!   large n is).
//!
//! The returned policy is an iterate chosen uniformly at random from
//! theta_1..theta_N. The `theory_preset` flag pins the schedule
//! alpha = 1/sqrt(N), mu = N^{-1/4}, n = N under which the expected squared
//! gradient norm at the returned iterate decays like 1/sqrt(N); m stays
//! free.
//!
//! Randomness is drawn from substreams keyed by (master seed, iteration,
//! direction, sign, episode), so traces are reproducible and independent of
//! evaluation parallelism. Updates are guarded: a non-finite parameter
//! aborts the run with the offending iteration rather than clamping.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::Distortion;
use crate::estimation::{drm_offpolicy_estimate, drm_onpolicy_estimate, EstimationError};
use crate::mdp::{discounted_return, Episode, Mdp};
use crate::oracle::{self, OracleError};
use crate::policy::{
    importance_ratio, perturb, BehaviorPolicy, PolicyError, PolicyParams, Sign, TabularSoftmax,
};
use crate::report::ValidationReport;
use crate::seeding::{
    pack_iter_direction, substream, TAG_BEHAVIOR_EPISODE, TAG_DIRECTION, TAG_EPISODE_MINUS,
    TAG_EPISODE_PLUS, TAG_SELECT,
};
use crate::sf::{assemble_gradient, sample_unit_sphere, SfConfig};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {reason}")]
    InvalidConfig { reason: String },
    #[error("this entry point runs in {expected:?} mode but the config says {got:?}")]
    WrongMode { expected: Mode, got: Mode },
    #[error("policy shape needs d = {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite parameter update at iteration {iteration}; aborting instead of clamping")]
    NonFiniteUpdate { iteration: usize },
    #[error("no iterates beyond theta_0 to select from (N = 0)")]
    NoIteratesToSelect,
    #[error("invalid behavior policy: {}", .0.violations.join("; "))]
    InvalidBehavior(ValidationReport),
    #[error("importance ratio failed at iteration {iteration}, episode {episode}")]
    Ratio {
        iteration: usize,
        episode: usize,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Which algorithm a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "on")]
    OnPolicy,
    #[serde(rename = "off")]
    OffPolicy,
}

/// Full configuration of a gradient-ascent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Iteration count N.
    pub n_iterations: usize,
    /// Step size alpha.
    pub step_size: f64,
    /// Smoothing radius, direction count, and parameter dimension.
    pub sf: SfConfig,
    /// Episodes per DRM evaluation, m.
    pub episodes_per_eval: usize,
    pub distortion: Distortion,
    pub mode: Mode,
    /// When set, (alpha, mu, n) must equal the 1/sqrt(N), N^{-1/4}, N
    /// schedule.
    pub theory_preset: bool,
    pub master_seed: u64,
}

impl OptConfig {
    /// Builds a theory-preset config: alpha = 1/sqrt(N), mu = N^{-1/4},
    /// n = N. Requires N >= 1.
    pub fn theory(
        n_iterations: usize,
        episodes_per_eval: usize,
        distortion: Distortion,
        mode: Mode,
        master_seed: u64,
        d: usize,
    ) -> Self {
        let nf = n_iterations as f64;
        Self {
            n_iterations,
            step_size: 1.0 / nf.sqrt(),
            sf: SfConfig {
                mu: nf.powf(-0.25),
                n: n_iterations,
                d,
            },
            episodes_per_eval,
            distortion,
            mode,
            theory_preset: true,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let invalid = |reason: String| OptimizerError::InvalidConfig { reason };
        self.sf.validate().map_err(invalid)?;
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(invalid(format!(
                "step_size = {} must be a finite nonnegative real",
                self.step_size
            )));
        }
        if self.episodes_per_eval == 0 {
            return Err(invalid("episodes_per_eval must be at least 1".into()));
        }
        if self.theory_preset {
            let nf = self.n_iterations as f64;
            let alpha = 1.0 / nf.sqrt();
            let mu = nf.powf(-0.25);
            if (self.step_size - alpha).abs() > 1e-12 {
                return Err(invalid(format!(
                    "theory preset requires alpha = 1/sqrt(N) = {alpha}, got {}",
                    self.step_size
                )));
            }
            if (self.sf.mu - mu).abs() > 1e-12 {
                return Err(invalid(format!(
                    "theory preset requires mu = N^(-1/4) = {mu}, got {}",
                    self.sf.mu
                )));
            }
            if self.sf.n != self.n_iterations {
                return Err(invalid(format!(
                    "theory preset requires n = N = {}, got {}",
                    self.n_iterations, self.sf.n
                )));
            }
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    /// Euclidean norm of the assembled gradient estimate.
    pub grad_norm: f64,
    /// Mean DRM estimate over the n plus-side perturbations.
    pub mean_drm_plus: f64,
    /// Mean DRM estimate over the n minus-side perturbations.
    pub mean_drm_minus: f64,
    /// Episodes consumed so far, this iteration included.
    pub episodes_cum: u64,
    /// Fraction of this iteration's episodes cut off by the horizon cap.
    pub truncated_frac: f64,
    /// Wall time of the iteration, seconds. Not part of serialized traces.
    pub wall_time_s: f64,
}

/// Complete trace of a gradient-ascent run.
#[derive(Debug, Clone)]
pub struct OptRun {
    pub config: OptConfig,
    /// theta_0 .. theta_N.
    pub iterates: Vec<PolicyParams>,
    pub records: Vec<IterationRecord>,
    /// The randomly selected output iterate.
    pub theta_r: PolicyParams,
    /// Its index in `iterates` (uniform over 1..=N).
    pub r_index: usize,
    pub episodes_total: u64,
    pub truncated_total: u64,
}

/// Uniform draw from the iterates theta_1..theta_N (theta_0 excluded).
pub fn select_random_iterate<R: Rng>(
    iterates: &[PolicyParams],
    rng: &mut R,
) -> Result<(usize, PolicyParams), OptimizerError> {
    if iterates.len() <= 1 {
        return Err(OptimizerError::NoIteratesToSelect);
    }
    let index = rng.gen_range(1..iterates.len());
    Ok((index, iterates[index].clone()))
}

fn check_setup(
    cfg: &OptConfig,
    mdp: &Mdp,
    theta0: &PolicyParams,
    expected_mode: Mode,
) -> Result<TabularSoftmax, OptimizerError> {
    cfg.validate()?;
    if cfg.mode != expected_mode {
        return Err(OptimizerError::WrongMode {
            expected: expected_mode,
            got: cfg.mode,
        });
    }
    let shape = TabularSoftmax::for_mdp(mdp);
    if cfg.sf.d != shape.dim() {
        return Err(OptimizerError::DimensionMismatch {
            expected: shape.dim(),
            got: cfg.sf.d,
        });
    }
    if theta0.dim() != shape.dim() {
        return Err(OptimizerError::DimensionMismatch {
            expected: shape.dim(),
            got: theta0.dim(),
        });
    }
    theta0.validate()?;
    Ok(shape)
}

fn apply_update(
    theta: &PolicyParams,
    grad: &[f64],
    step: f64,
    iteration: usize,
) -> Result<PolicyParams, OptimizerError> {
    let next: Vec<f64> = theta
        .0
        .iter()
        .zip(grad)
        .map(|(t, g)| t + step * g)
        .collect();
    if next.iter().any(|x| !x.is_finite()) {
        return Err(OptimizerError::NonFiniteUpdate { iteration });
    }
    Ok(PolicyParams(next))
}

/// DRM-OnP-SF: on-policy gradient ascent.
///
/// Per iteration k and direction i, draws v_i from the unit sphere, runs m
/// episodes under each of softmax(theta_k + mu v_i) and
/// softmax(theta_k - mu v_i), turns each batch into an order-statistics DRM
/// estimate, assembles the two-point gradient, and steps. Episode count is
/// exactly 2 m n N.
pub fn drm_onp_sf(
    cfg: &OptConfig,
    mdp: &Mdp,
    theta0: PolicyParams,
    ) -> Result<OptRun, OptimizerError> {
    let shape = check_setup(cfg, mdp, &theta0, Mode::OnPolicy)?;
    let (m, n, mu) = (cfg.episodes_per_eval, cfg.sf.n, cfg.sf.mu);
    let g = &cfg.distortion;

    let mut iterates = vec![theta0];
    let mut records = Vec::with_capacity(cfg.n_iterations);
    let mut episodes_total = 0u64;
    let mut truncated_total = 0u64;

    for k in 0..cfg.n_iterations {
        let start = std::time::Instant::now();
        let theta_k = iterates.last().expect("nonempty").clone();
        let mut directions = Vec::with_capacity(n);
        let mut evaluations = Vec::with_capacity(n);
        let mut truncated_iter = 0u64;
        let mut sum_plus = 0.0;
        let mut sum_minus = 0.0;
        for i in 0..n {
            let mut dir_rng = substream(cfg.master_seed, TAG_DIRECTION, k as u64, i as u64);
            let v = sample_unit_sphere(cfg.sf.d, &mut dir_rng);
            let ki = pack_iter_direction(k, i);
            let mut rho = [0.0; 2];
            for (slot, (sign, tag)) in [(Sign::Plus, TAG_EPISODE_PLUS), (Sign::Minus, TAG_EPISODE_MINUS)]
                .into_iter()
                .enumerate()
            {
                let perturbed = perturb(&theta_k, mu, &v, sign)?;
                let mut returns = Vec::with_capacity(m);
                for ep_index in 0..m {
                    let mut ep_rng = substream(cfg.master_seed, tag, ki, ep_index as u64);
                    let ep = mdp.simulate_episode(
                        |s, rng| {
                            shape
                                .sample_action(&perturbed, s, rng)
                                .expect("simulator only queries non-terminal states")
                        },
                        &mut ep_rng,
                    );
                    if !ep.terminated {
                        truncated_iter += 1;
                    }
                    returns.push(discounted_return(&ep, mdp.gamma()));
                }
                episodes_total += m as u64;
                rho[slot] = drm_onpolicy_estimate(&returns, g)?;
            }
            sum_plus += rho[0];
            sum_minus += rho[1];
            evaluations.push((rho[0], rho[1]));
            directions.push(v);
        }
        let grad = assemble_gradient(&evaluations, &directions, mu);
        let next = apply_update(&theta_k, &grad, cfg.step_size, k)?;
        truncated_total += truncated_iter;
        records.push(IterationRecord {
            iter: k,
            grad_norm: grad.iter().map(|x| x * x).sum::<f64>().sqrt(),
            mean_drm_plus: sum_plus / n as f64,
            mean_drm_minus: sum_minus / n as f64,
            episodes_cum: episodes_total,
            truncated_frac: truncated_iter as f64 / (2 * m * n) as f64,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        iterates.push(next);
    }

    let mut select_rng = substream(cfg.master_seed, TAG_SELECT, 0, 0);
    let (r_index, theta_r) = select_random_iterate(&iterates, &mut select_rng)?;
    Ok(OptRun {
        config: cfg.clone(),
        iterates,
        records,
        theta_r,
        r_index,
        episodes_total,
        truncated_total,
    })
}

/// DRM-OffP-SF: off-policy gradient ascent from behavior-policy episodes.
///
/// Per iteration, simulates m episodes under the behavior policy once.
/// Each of the 2n perturbed target policies is then evaluated on those same
/// episodes through its importance ratios, so the episode count is exactly
/// m N regardless of n. Support violations surface the offending
/// (state, action, episode).
pub fn drm_offp_sf(
    cfg: &OptConfig,
    mdp: &Mdp,
    behavior: &BehaviorPolicy,
    theta0: PolicyParams,
) -> Result<OptRun, OptimizerError> {
    let shape = check_setup(cfg, mdp, &theta0, Mode::OffPolicy)?;
    let behavior_report = behavior.validate(mdp.num_states(), mdp.num_actions());
    if !behavior_report.is_valid() {
        return Err(OptimizerError::InvalidBehavior(behavior_report));
    }
    let (m, n, mu) = (cfg.episodes_per_eval, cfg.sf.n, cfg.sf.mu);
    let g = &cfg.distortion;

    let mut iterates = vec![theta0];
    let mut records = Vec::with_capacity(cfg.n_iterations);
    let mut episodes_total = 0u64;
    let mut truncated_total = 0u64;

    for k in 0..cfg.n_iterations {
        let start = std::time::Instant::now();
        let theta_k = iterates.last().expect("nonempty").clone();

        let mut episodes: Vec<Episode> = Vec::with_capacity(m);
        let mut returns = Vec::with_capacity(m);
        let mut truncated_iter = 0u64;
        for ep_index in 0..m {
            let mut ep_rng = substream(
                cfg.master_seed,
                TAG_BEHAVIOR_EPISODE,
                k as u64,
                ep_index as u64,
            );
            let ep = mdp.simulate_episode(
                |s, rng| {
                    behavior
                        .sample_action(s, rng)
                        .expect("behavior rows validated above")
                },
                &mut ep_rng,
            );
            if !ep.terminated {
                truncated_iter += 1;
            }
            returns.push(discounted_return(&ep, mdp.gamma()));
            episodes.push(ep);
        }
        episodes_total += m as u64;

        let mut directions = Vec::with_capacity(n);
        let mut evaluations = Vec::with_capacity(n);
        let mut sum_plus = 0.0;
        let mut sum_minus = 0.0;
        for i in 0..n {
            let mut dir_rng = substream(cfg.master_seed, TAG_DIRECTION, k as u64, i as u64);
            let v = sample_unit_sphere(cfg.sf.d, &mut dir_rng);
            let mut rho = [0.0; 2];
            for (slot, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
                let perturbed = perturb(&theta_k, mu, &v, sign)?;
                let mut ratios = Vec::with_capacity(m);
                for (episode, ep) in episodes.iter().enumerate() {
                    let psi = importance_ratio(ep, &shape, &perturbed, behavior).map_err(
                        |source| OptimizerError::Ratio {
                            iteration: k,
                            episode,
                            source,
                        },
                    )?;
                    ratios.push(psi);
                }
                rho[slot] = drm_offpolicy_estimate(&returns, &ratios, g)?;
            }
            sum_plus += rho[0];
            sum_minus += rho[1];
            evaluations.push((rho[0], rho[1]));
            directions.push(v);
        }
        let grad = assemble_gradient(&evaluations, &directions, mu);
        let next = apply_update(&theta_k, &grad, cfg.step_size, k)?;
        truncated_total += truncated_iter;
        records.push(IterationRecord {
            iter: k,
            grad_norm: grad.iter().map(|x| x * x).sum::<f64>().sqrt(),
            mean_drm_plus: sum_plus / n as f64,
            mean_drm_minus: sum_minus / n as f64,
            episodes_cum: episodes_total,
            truncated_frac: truncated_iter as f64 / m as f64,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        iterates.push(next);
    }

    let mut select_rng = substream(cfg.master_seed, TAG_SELECT, 0, 0);
    let (r_index, theta_r) = select_random_iterate(&iterates, &mut select_rng)?;
    Ok(OptRun {
        config: cfg.clone(),
        iterates,
        records,
        theta_r,
        r_index,
        episodes_total,
        truncated_total,
    })
}

/// Oracle-evaluated stationarity summary of a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Squared norm of the exact-DRM finite-difference gradient at theta_R.
    pub grad_norm_sq_at_theta_r: f64,
    /// Mean of the squared gradient norms over theta_1..theta_N — the
    /// quantity the 1/sqrt(N) bound controls.
    pub mean_grad_norm_sq: f64,
}

/// Evaluates the exact finite-difference gradient at theta_R and averaged
/// over all selectable iterates. Refuses (propagating the oracle error)
/// when the MDP is too large to enumerate.
pub fn stationarity_report(
    run: &OptRun,
    mdp: &Mdp,
    g: &Distortion,
    fd_step: f64,
    path_budget: usize,
) -> Result<StationarityReport, OracleError> {
    let norm_sq = |theta: &PolicyParams| -> Result<f64, OracleError> {
        let grad = oracle::finite_difference_gradient(mdp, theta, g, fd_step, path_budget)?;
        Ok(grad.iter().map(|x| x * x).sum())
    };
    let at_r = norm_sq(&run.theta_r)?;
    let mut total = 0.0;
    for theta in &run.iterates[1..] {
        total += norm_sq(theta)?;
    }
    Ok(StationarityReport {
        grad_norm_sq_at_theta_r: at_r,
        mean_grad_norm_sq: total / (run.iterates.len() - 1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::mdp::Mdp;
    use crate::seeding;

    fn bandit() -> Mdp {
        Mdp::compile(envs::two_armed_bandit()).unwrap()
    }

    fn small_cfg(mode: Mode, seed: u64) -> OptConfig {
        OptConfig {
            n_iterations: 4,
            step_size: 0.1,
            sf: SfConfig { mu: 0.2, n: 3, d: 4 },
            episodes_per_eval: 5,
            distortion: Distortion::identity(),
            mode,
            theory_preset: false,
            master_seed: seed,
        }
    }

    #[test]
    fn zero_iterations_fails_on_iterate_selection() {
        let mut cfg = small_cfg(Mode::OnPolicy, 1);
        cfg.n_iterations = 0;
        let err = drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(4)).unwrap_err();
        assert!(matches!(err, OptimizerError::NoIteratesToSelect));
    }

    #[test]
    fn zero_step_size_freezes_the_iterates() {
        let mut cfg = small_cfg(Mode::OnPolicy, 2);
        cfg.step_size = 0.0;
        let run = drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(4)).unwrap();
        for theta in &run.iterates {
            assert_eq!(theta.0, vec![0.0; 4]);
        }
        assert_eq!(run.theta_r.0, vec![0.0; 4]);
    }

    #[test]
    fn onpolicy_episode_budget_is_2mnn() {
        let cfg = small_cfg(Mode::OnPolicy, 3);
        let run = drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(4)).unwrap();
        assert_eq!(run.episodes_total, 2 * 5 * 3 * 4);
        assert_eq!(run.records.last().unwrap().episodes_cum, 2 * 5 * 3 * 4);
    }

    #[test]
    fn offpolicy_episode_budget_is_mn() {
        let mdp = bandit();
        let behavior = BehaviorPolicy::uniform(2, 2);
        let mut cfg = small_cfg(Mode::OffPolicy, 4);
        cfg.sf.n = 50;
        let run = drm_offp_sf(&cfg, &mdp, &behavior, PolicyParams::zeros(4)).unwrap();
        assert_eq!(run.episodes_total, 5 * 4);
        assert_eq!(run.records.last().unwrap().episodes_cum, 5 * 4);
    }

    #[test]
    fn identical_seed_reproduces_the_run() {
        let cfg = small_cfg(Mode::OnPolicy, 5);
        let mdp = bandit();
        let a = drm_onp_sf(&cfg, &mdp, PolicyParams::zeros(4)).unwrap();
        let b = drm_onp_sf(&cfg, &mdp, PolicyParams::zeros(4)).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.theta_r, b.theta_r);
        assert_eq!(a.r_index, b.r_index);
        assert!((1..=cfg.n_iterations).contains(&a.r_index));
        assert_eq!(a.theta_r, a.iterates[a.r_index]);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.grad_norm.to_bits(), rb.grad_norm.to_bits());
            assert_eq!(ra.mean_drm_plus.to_bits(), rb.mean_drm_plus.to_bits());
            assert_eq!(ra.mean_drm_minus.to_bits(), rb.mean_drm_minus.to_bits());
        }
    }

    #[test]
    fn wrong_mode_is_rejected() {
        let cfg = small_cfg(Mode::OffPolicy, 6);
        assert!(matches!(
            drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(4)),
            Err(OptimizerError::WrongMode { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = small_cfg(Mode::OnPolicy, 7);
        assert!(matches!(
            drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(3)),
            Err(OptimizerError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn oversized_step_aborts_with_iteration_index() {
        let mut cfg = small_cfg(Mode::OnPolicy, 8);
        cfg.step_size = f64::MAX;
        cfg.n_iterations = 10;
        let err = drm_onp_sf(&cfg, &bandit(), PolicyParams::zeros(4)).unwrap_err();
        assert!(matches!(err, OptimizerError::NonFiniteUpdate { .. }), "{err:?}");
    }

    #[test]
    fn theory_preset_schedule_is_enforced() {
        let cfg = OptConfig::theory(100, 10, Distortion::identity(), Mode::OnPolicy, 0, 4);
        assert!(cfg.validate().is_ok());
        assert!((cfg.step_size - 0.1).abs() < 1e-15);
        assert!((cfg.sf.mu - 100f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(cfg.sf.n, 100);

        let mut tampered = cfg.clone();
        tampered.step_size = 0.2;
        assert!(matches!(
            tampered.validate(),
            Err(OptimizerError::InvalidConfig { .. })
        ));
        let mut tampered = cfg;
        tampered.sf.n = 50;
        assert!(tampered.validate().is_err());
    }

    #[test]
    fn select_random_iterate_behaviour() {
        let iterates: Vec<PolicyParams> =
            (0..5).map(|i| PolicyParams(vec![i as f64])).collect();

        // N = 1: index 1 always.
        let pair = &iterates[..2];
        for seed in 0..20 {
            let mut rng = seeding::substream(seed, TAG_SELECT, 0, 0);
            assert_eq!(select_random_iterate(pair, &mut rng).unwrap().0, 1);
        }

        // N = 4: uniform frequencies.
        let mut counts = [0usize; 5];
        for seed in 0..10_000u64 {
            let mut rng = seeding::substream(seed, TAG_SELECT, 0, 0);
            let (idx, _) = select_random_iterate(&iterates, &mut rng).unwrap();
            counts[idx] += 1;
        }
        assert_eq!(counts[0], 0);
        let sigma = (0.25 * 0.75 / 10_000f64).sqrt();
        for &c in &counts[1..] {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() <= 3.0 * sigma, "freq {freq}");
        }

        // Deterministic under a fixed seed.
        let mut rng1 = seeding::substream(77, TAG_SELECT, 0, 0);
        let mut rng2 = seeding::substream(77, TAG_SELECT, 0, 0);
        assert_eq!(
            select_random_iterate(&iterates, &mut rng1).unwrap().0,
            select_random_iterate(&iterates, &mut rng2).unwrap().0
        );

        // Empty selection range.
        let mut rng = seeding::substream(0, TAG_SELECT, 0, 0);
        assert!(matches!(
            select_random_iterate(&iterates[..1], &mut rng),
            Err(OptimizerError::NoIteratesToSelect)
        ));
    }

    #[test]
    fn malformed_behavior_policy_is_rejected_upfront() {
        let mdp = bandit();
        let behavior = BehaviorPolicy::new([(1usize, vec![0.5, 0.25])].into_iter().collect());
        let cfg = small_cfg(Mode::OffPolicy, 9);
        let err = drm_offp_sf(&cfg, &mdp, &behavior, PolicyParams::zeros(4)).unwrap_err();
        assert!(matches!(err, OptimizerError::InvalidBehavior(_)), "{err:?}");
    }

    #[test]
    fn zero_support_behavior_runs_but_never_visits_the_dead_arm() {
        // b puts no mass on arm 1, so no sampled episode can visit it and
        // the target's mass there never meets a zero denominator.
        let mdp = bandit();
        let behavior = BehaviorPolicy::new([(1usize, vec![1.0, 0.0])].into_iter().collect());
        let cfg = small_cfg(Mode::OffPolicy, 9);
        let run = drm_offp_sf(&cfg, &mdp, &behavior, PolicyParams::zeros(4)).unwrap();
        assert_eq!(run.episodes_total, 5 * 4);
    }

    #[test]
    fn stationarity_report_on_frozen_run_is_flat() {
        let mut cfg = small_cfg(Mode::OnPolicy, 10);
        cfg.step_size = 0.0;
        let mdp = bandit();
        let run = drm_onp_sf(&cfg, &mdp, PolicyParams::zeros(4)).unwrap();
        let report =
            stationarity_report(&run, &mdp, &Distortion::identity(), 1e-5, 10_000).unwrap();
        // Every iterate equals theta_0, so the two numbers coincide.
        assert!((report.grad_norm_sq_at_theta_r - report.mean_grad_norm_sq).abs() < 1e-18);
        let grad0 = oracle::finite_difference_gradient(
            &mdp,
            &PolicyParams::zeros(4),
            &Distortion::identity(),
            1e-5,
            10_000,
        )
        .unwrap();
        let norm0: f64 = grad0.iter().map(|x| x * x).sum();
        assert!((report.grad_norm_sq_at_theta_r - norm0).abs() < 1e-15);
    }

    #[test]
    fn stationarity_report_zero_at_symmetric_optimum() {
        // Equal-reward arms: any policy is optimal, gradient vanishes.
        let mut spec = envs::two_armed_bandit();
        for t in &mut spec.transitions {
            t.r = 0.5;
        }
        let mdp = Mdp::compile(spec).unwrap();
        let mut cfg = small_cfg(Mode::OnPolicy, 11);
        cfg.n_iterations = 2;
        let run = drm_onp_sf(&cfg, &mdp, PolicyParams::zeros(4)).unwrap();
        let report =
            stationarity_report(&run, &mdp, &Distortion::identity(), 1e-5, 10_000).unwrap();
        assert!(report.grad_norm_sq_at_theta_r <= 1e-6);
        assert!(report.mean_grad_norm_sq <= 1e-6);
    }

    #[test]
    fn offpolicy_estimates_match_onpolicy_on_shared_episodes_when_b_equals_target() {
        // Behavior identical to the target softmax and mu -> 0 surrogate:
        // ratios are ~1, so the weighted estimator agrees with the plain
        // order-statistics estimator on the same episodes.
        let mdp = Mdp::compile(envs::layered_chain()).unwrap();
        let shape = TabularSoftmax::for_mdp(&mdp);
        let theta = PolicyParams(vec![
            0.0, 0.0, 0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.7,
        ]);
        let behavior = BehaviorPolicy::from_softmax(&shape, &theta).unwrap();
        let mu = 1e-8;
        let g = Distortion::new(crate::distortion::DistortionKind::DualPower, 2.0).unwrap();

        let mut episodes = Vec::new();
        let mut returns = Vec::new();
        for ep_index in 0..200u64 {
            let mut rng = substream(13, TAG_BEHAVIOR_EPISODE, 0, ep_index);
            let ep = mdp.simulate_episode(
                |s, rng| behavior.sample_action(s, rng).unwrap(),
                &mut rng,
            );
            returns.push(discounted_return(&ep, mdp.gamma()));
            episodes.push(ep);
        }
        let mut dir_rng = substream(13, TAG_DIRECTION, 0, 0);
        let v = sample_unit_sphere(10, &mut dir_rng);
        for sign in [Sign::Plus, Sign::Minus] {
            let perturbed = perturb(&theta, mu, &v, sign).unwrap();
            let ratios: Vec<f64> = episodes
                .iter()
                .map(|ep| importance_ratio(ep, &shape, &perturbed, &behavior).unwrap())
                .collect();
            let off = drm_offpolicy_estimate(&returns, &ratios, &g).unwrap();
            let on = drm_onpolicy_estimate(&returns, &g).unwrap();
            assert!((off - on).abs() < 1e-6, "off {off} vs on {on}");
        }
    }
}
