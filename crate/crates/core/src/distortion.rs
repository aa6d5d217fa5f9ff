//! Smooth distortion functions.
//!
//! A distortion function g maps [0, 1] onto [0, 1], is nondecreasing, and
//! satisfies g(0) = 0 and g(1) = 1. Reweighting a CDF through a concave g
//! yields a coherent risk measure; the identity g recovers the plain
//! expectation. The supported family:
//!
//! | kind          | g(s)                                  | parameter   |
//! |---------------|---------------------------------------|-------------|
//! | `identity`    | s                                     | r unused    |
//! | `dual_power`  | 1 - (1-s)^r                           | r >= 2      |
//! | `quadratic`   | (1+r)s - rs^2                         | 0 <= r <= 1 |
//! | `exponential` | (1 - e^{-rs}) / (1 - e^{-r})          | r > 0       |
//! | `square_root` | (sqrt(1+rs) - 1) / (sqrt(1+r) - 1)    | r > 0       |
//! | `logarithmic` | ln(1+rs) / ln(1+r)                    | r > 0       |
//!
//! Each instance carries `derivative_bound`, the closed-form supremum of
//! |g'| on (0, 1). All kinds here are concave, so the supremum sits at
//! s -> 0 (and equals 1 everywhere for the identity). That constant enters
//! the estimator mean-squared-error bounds, so it must be an actual number
//! rather than an assumption.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::ValidationReport;

/// The supported distortion families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    Identity,
    DualPower,
    Quadratic,
    Exponential,
    SquareRoot,
    Logarithmic,
}

impl DistortionKind {
    /// Name used in config files and error messages.
    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::Identity => "identity",
            DistortionKind::DualPower => "dual_power",
            DistortionKind::Quadratic => "quadratic",
            DistortionKind::Exponential => "exponential",
            DistortionKind::SquareRoot => "square_root",
            DistortionKind::Logarithmic => "logarithmic",
        }
    }

    /// Admissible range for the parameter, as text for diagnostics.
    fn parameter_range(self) -> &'static str {
        match self {
            DistortionKind::Identity => "unused",
            DistortionKind::DualPower => "r >= 2",
            DistortionKind::Quadratic => "0 <= r <= 1",
            DistortionKind::Exponential
            | DistortionKind::SquareRoot
            | DistortionKind::Logarithmic => "r > 0",
        }
    }

    fn parameter_ok(self, r: f64) -> bool {
        if !r.is_finite() {
            return false;
        }
        match self {
            DistortionKind::Identity => true,
            DistortionKind::DualPower => r >= 2.0,
            DistortionKind::Quadratic => (0.0..=1.0).contains(&r),
            DistortionKind::Exponential
            | DistortionKind::SquareRoot
            | DistortionKind::Logarithmic => r > 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("parameter r = {r} outside the admissible range for {kind} ({range})")]
    ParameterRange {
        kind: &'static str,
        r: f64,
        range: &'static str,
    },
    #[error("argument s = {s} outside [0, 1]")]
    ArgumentRange { s: f64 },
    #[error("derivative requested at endpoint s = {s}; defined on the open interval (0, 1)")]
    DerivativeEndpoint { s: f64 },
}

/// Wire form used in config files: `{"kind": "dual_power", "r": 2.0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistortionConfig {
    kind: DistortionKind,
    #[serde(default)]
    r: f64,
}

/// A validated distortion function together with its derivative bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "DistortionConfig")]
pub struct Distortion {
    kind: DistortionKind,
    r: f64,
    derivative_bound: f64,
}

impl From<Distortion> for DistortionConfig {
    fn from(d: Distortion) -> Self {
        DistortionConfig {
            kind: d.kind,
            r: d.r,
        }
    }
}

impl<'de> Deserialize<'de> for Distortion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cfg = DistortionConfig::deserialize(deserializer)?;
        Distortion::new(cfg.kind, cfg.r).map_err(serde::de::Error::custom)
    }
}

impl Distortion {
    /// Builds a distortion, rejecting parameters outside the family's range.
    pub fn new(kind: DistortionKind, r: f64) -> Result<Self, DistortionError> {
        if !kind.parameter_ok(r) {
            return Err(DistortionError::ParameterRange {
                kind: kind.name(),
                r,
                range: kind.parameter_range(),
            });
        }
        Ok(Self {
            kind,
            r,
            derivative_bound: derivative_sup(kind, r),
        })
    }

    /// The risk-neutral baseline g(s) = s.
    pub fn identity() -> Self {
        Self::new(DistortionKind::Identity, 0.0).expect("identity has no parameter constraint")
    }

    pub fn kind(&self) -> DistortionKind {
        self.kind
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Supremum of |g'| on (0, 1), computed in closed form per kind.
    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    /// Evaluates g(s) for s in [0, 1].
    ///
    /// The endpoints are short-circuited to exactly 0.0 and 1.0 so that the
    /// defining identities g(0) = 0 and g(1) = 1 hold bitwise; the interior
    /// uses the closed-form expression.
    pub fn eval(&self, s: f64) -> Result<f64, DistortionError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(DistortionError::ArgumentRange { s });
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        if s == 1.0 {
            return Ok(1.0);
        }
        let r = self.r;
        Ok(match self.kind {
            DistortionKind::Identity => s,
            DistortionKind::DualPower => 1.0 - (1.0 - s).powf(r),
            DistortionKind::Quadratic => (1.0 + r) * s - r * s * s,
            DistortionKind::Exponential => (1.0 - (-r * s).exp()) / (1.0 - (-r).exp()),
            DistortionKind::SquareRoot => ((1.0 + r * s).sqrt() - 1.0) / ((1.0 + r).sqrt() - 1.0),
            DistortionKind::Logarithmic => (1.0 + r * s).ln() / (1.0 + r).ln(),
        })
    }

    /// Analytic derivative g'(s) on the open interval (0, 1).
    pub fn derivative(&self, s: f64) -> Result<f64, DistortionError> {
        if !(s > 0.0 && s < 1.0) {
            return Err(DistortionError::DerivativeEndpoint { s });
        }
        let r = self.r;
        Ok(match self.kind {
            DistortionKind::Identity => 1.0,
            DistortionKind::DualPower => r * (1.0 - s).powf(r - 1.0),
            DistortionKind::Quadratic => (1.0 + r) - 2.0 * r * s,
            DistortionKind::Exponential => r * (-r * s).exp() / (1.0 - (-r).exp()),
            DistortionKind::SquareRoot => {
                r / (2.0 * (1.0 + r * s).sqrt() * ((1.0 + r).sqrt() - 1.0))
            }
            DistortionKind::Logarithmic => r / ((1.0 + r * s) * (1.0 + r).ln()),
        })
    }
}

/// sup |g'| on (0, 1). Every non-identity kind is concave, so g' is
/// nonincreasing and the supremum is the limit at s -> 0.
fn derivative_sup(kind: DistortionKind, r: f64) -> f64 {
    match kind {
        DistortionKind::Identity => 1.0,
        DistortionKind::DualPower => r,
        DistortionKind::Quadratic => 1.0 + r,
        DistortionKind::Exponential => r / (1.0 - (-r).exp()),
        DistortionKind::SquareRoot => r / (2.0 * ((1.0 + r).sqrt() - 1.0)),
        DistortionKind::Logarithmic => r / (1.0 + r).ln(),
    }
}

/// Report-style check of a (kind, r) pair: parameter range, endpoint values,
/// monotonicity on a 1e-3 grid, and that the stored derivative bound
/// dominates |g'| on that grid.
pub fn validate_distortion(kind: DistortionKind, r: f64) -> ValidationReport {
    let mut report = ValidationReport::new();
    if !kind.parameter_ok(r) {
        report.violation(format!(
            "parameter r = {r} outside the admissible range for {} ({})",
            kind.name(),
            kind.parameter_range()
        ));
        return report;
    }
    let g = Distortion::new(kind, r).expect("range checked above");

    let g0 = g.eval(0.0).expect("0 in range");
    if g0.abs() > 1e-12 {
        report.violation(format!("g(0) = {g0}, expected 0"));
    }
    let g1 = g.eval(1.0).expect("1 in range");
    if (g1 - 1.0).abs() > 1e-12 {
        report.violation(format!("g(1) = {g1}, expected 1"));
    }

    const STEPS: usize = 1000;
    let mut prev = g0;
    let mut max_grid_derivative = 0.0f64;
    for i in 1..=STEPS {
        let s = i as f64 / STEPS as f64;
        let cur = g.eval(s).expect("grid point in range");
        if cur < prev - 1e-12 {
            report.violation(format!(
                "not nondecreasing: g({s}) = {cur} < g({}) = {prev}",
                (i - 1) as f64 / STEPS as f64
            ));
        }
        prev = cur;
        if i < STEPS {
            max_grid_derivative =
                max_grid_derivative.max(g.derivative(s).expect("interior point").abs());
        }
    }
    if g.derivative_bound() < max_grid_derivative {
        report.violation(format!(
            "derivative bound {} below observed grid maximum {max_grid_derivative}",
            g.derivative_bound()
        ));
    }
    report
}
