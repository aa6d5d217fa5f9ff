//! Property tests for the DRM estimators.
//!
//! The central one is the order-statistics / Choquet-integration
//! equivalence: the closed-form formulas must agree with integrating the
//! corresponding step CDF on any batch, including ties, zero weights, and
//! weights large enough to saturate the clipped CDF.

use drm_rl::distortion::{Distortion, DistortionKind};
use drm_rl::estimation::{
    choquet_drm, drm_offpolicy_estimate, drm_onpolicy_estimate, edf, weighted_cdf, ReturnBatch,
};
use proptest::prelude::*;

const M_R: f64 = 60.0;

fn distortions() -> Vec<Distortion> {
    vec![
        Distortion::identity(),
        Distortion::new(DistortionKind::DualPower, 2.0).unwrap(),
        Distortion::new(DistortionKind::DualPower, 4.0).unwrap(),
        Distortion::new(DistortionKind::Quadratic, 0.8).unwrap(),
        Distortion::new(DistortionKind::Exponential, 2.0).unwrap(),
        Distortion::new(DistortionKind::SquareRoot, 3.0).unwrap(),
        Distortion::new(DistortionKind::Logarithmic, 1.5).unwrap(),
    ]
}

/// Returns drawn from a small lattice so ties occur constantly.
fn tied_returns() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-200i32..=200).prop_map(|k| k as f64 / 4.0), 1..=200)
}

/// Weights spanning zero, fractional, and CDF-saturating values.
fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            Just(0.0),
            (1u32..=4000).prop_map(|k| k as f64 / 1000.0),
        ],
        len..=len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn onpolicy_order_statistics_match_choquet(returns in tied_returns()) {
        let batch = ReturnBatch::on_policy(returns.clone()).unwrap();
        let cdf = edf(&batch, M_R).unwrap();
        for g in distortions() {
            let direct = drm_onpolicy_estimate(&returns, &g).unwrap();
            let via_cdf = choquet_drm(&cdf, &g);
            prop_assert!(
                (direct - via_cdf).abs() < 1e-10,
                "{:?}: {direct} vs {via_cdf}", g.kind()
            );
        }
    }

    #[test]
    fn offpolicy_order_statistics_match_choquet(
        (returns, w) in tied_returns().prop_flat_map(|r| {
            let len = r.len();
            (Just(r), weights(len))
        })
    ) {
        let batch = ReturnBatch::off_policy(returns.clone(), w.clone()).unwrap();
        let cdf = weighted_cdf(&batch, M_R).unwrap();
        for g in distortions() {
            let direct = drm_offpolicy_estimate(&returns, &w, &g).unwrap();
            let via_cdf = choquet_drm(&cdf, &g);
            prop_assert!(
                (direct - via_cdf).abs() < 1e-10,
                "{:?}: {direct} vs {via_cdf}", g.kind()
            );
        }
    }

    #[test]
    fn estimate_is_translation_equivariant(
        returns in tied_returns(),
        c in -20i32..=20,
    ) {
        let c = c as f64 / 2.0;
        let shifted: Vec<f64> = returns.iter().map(|r| r + c).collect();
        for g in distortions() {
            let base = drm_onpolicy_estimate(&returns, &g).unwrap();
            let moved = drm_onpolicy_estimate(&shifted, &g).unwrap();
            prop_assert!((moved - (base + c)).abs() < 1e-10);
        }
    }

    #[test]
    fn estimate_is_positively_homogeneous(
        returns in tied_returns(),
        lambda in 1u32..=40,
    ) {
        let lambda = lambda as f64 / 4.0;
        let scaled: Vec<f64> = returns.iter().map(|r| r * lambda).collect();
        for g in distortions() {
            let base = drm_onpolicy_estimate(&returns, &g).unwrap();
            let stretched = drm_onpolicy_estimate(&scaled, &g).unwrap();
            prop_assert!((stretched - lambda * base).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_a_sample_never_lowers_the_estimate(
        returns in tied_returns(),
        pick in any::<prop::sample::Index>(),
        bump in 1u32..=100,
    ) {
        let idx = pick.index(returns.len());
        let mut raised = returns.clone();
        raised[idx] += bump as f64 / 10.0;
        for g in distortions() {
            let before = drm_onpolicy_estimate(&returns, &g).unwrap();
            let after = drm_onpolicy_estimate(&raised, &g).unwrap();
            prop_assert!(after >= before - 1e-10);
        }
    }

    #[test]
    fn estimate_lies_between_sample_extremes(returns in tied_returns()) {
        let min = returns.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for g in distortions() {
            let est = drm_onpolicy_estimate(&returns, &g).unwrap();
            prop_assert!(est >= min - 1e-10 && est <= max + 1e-10);
            prop_assert!(est.abs() <= M_R + 1e-10);
        }
    }

    #[test]
    fn pointwise_larger_distortion_gives_larger_estimate(returns in tied_returns()) {
        // Each pair satisfies g_hi >= g_lo pointwise on [0, 1].
        let pairs = [
            (
                Distortion::new(DistortionKind::DualPower, 2.0).unwrap(),
                Distortion::identity(),
            ),
            (
                Distortion::new(DistortionKind::DualPower, 3.0).unwrap(),
                Distortion::new(DistortionKind::DualPower, 2.0).unwrap(),
            ),
            (
                Distortion::new(DistortionKind::Quadratic, 0.8).unwrap(),
                Distortion::identity(),
            ),
        ];
        for (hi, lo) in pairs {
            let est_hi = drm_onpolicy_estimate(&returns, &hi).unwrap();
            let est_lo = drm_onpolicy_estimate(&returns, &lo).unwrap();
            prop_assert!(est_hi >= est_lo - 1e-10);
        }
    }

    #[test]
    fn unit_weights_reduce_to_onpolicy_bitwise(returns in tied_returns()) {
        let w = vec![1.0; returns.len()];
        for g in distortions() {
            let off = drm_offpolicy_estimate(&returns, &w, &g).unwrap();
            let on = drm_onpolicy_estimate(&returns, &g).unwrap();
            prop_assert_eq!(off.to_bits(), on.to_bits());
        }
    }

    #[test]
    fn identity_distortion_recovers_the_sample_mean(returns in tied_returns()) {
        let est = drm_onpolicy_estimate(&returns, &Distortion::identity()).unwrap();
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        prop_assert!((est - mean).abs() < 1e-12);
    }
}
