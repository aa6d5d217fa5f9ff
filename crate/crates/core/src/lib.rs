//! Distortion-risk-measure policy optimization for episodic MDPs.
//!
//! A distortion risk measure (DRM) is the Choquet integral of a return
//! distribution under a reweighting of its CDF by a distortion function g;
//! concave distortions emphasize bad outcomes without discarding the rest
//! of the distribution, and the identity recovers the plain expectation.
//! This crate provides the pieces needed to maximize the DRM of the
//! discounted return of a finite episodic MDP over tabular softmax
//! policies:
//!
//! * [`mdp`] — MDP specs, validation, and seeded episode simulation;
//! * [`policy`] — softmax parameterization, perturbation, importance ratios;
//! * [`distortion`] — the smooth distortion family with derivative bounds;
//! * [`estimation`] — step CDFs, Choquet integration, and the on/off-policy
//!   order-statistics DRM estimators;
//! * [`sf`] — two-point smoothed-functional gradient estimation on random
//!   unit-sphere directions;
//! * [`optimizer`] — the on-policy and off-policy gradient-ascent loops
//!   with the theory-preset hyperparameter schedule and random-iterate
//!   output;
//! * [`oracle`] — exact return distributions, exact DRMs, and
//!   finite-difference gradients on desk-scale MDPs by path enumeration;
//! * [`envs`] — the bundled desk MDPs;
//! * [`seeding`] — keyed RNG substreams making every run reproducible.

pub mod distortion;
pub mod envs;
pub mod estimation;
pub mod mdp;
pub mod optimizer;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod seeding;
pub mod sf;

pub use distortion::{validate_distortion, Distortion, DistortionError, DistortionKind};
pub use estimation::{
    choquet_drm, drm_offpolicy_estimate, drm_onpolicy_estimate, edf, weighted_cdf,
    EstimationError, ReturnBatch, StepCdf,
};
pub use mdp::{
    discounted_return, validate_mdp, Episode, Mdp, MdpError, MdpSpec, Step, Transition,
};
pub use optimizer::{
    drm_offp_sf, drm_onp_sf, select_random_iterate, stationarity_report, IterationRecord, Mode,
    OptConfig, OptRun, OptimizerError, StationarityReport,
};
pub use oracle::{
    enumerate_return_distribution, exact_drm, finite_difference_gradient, max_importance_ratio,
    ExactReturnDistribution, OracleError, DEFAULT_FD_STEP, DEFAULT_PATH_BUDGET,
};
pub use policy::{
    importance_ratio, perturb, BehaviorPolicy, PolicyError, PolicyParams, Sign, TabularSoftmax,
};
pub use report::ValidationReport;
pub use sf::{sample_unit_sphere, sf_gradient_estimate, SfConfig, SfError, SfGradient};
