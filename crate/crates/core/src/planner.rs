//! Sample-size and scale-factor planning.
//!
//! For relative error `epsilon`, failure probability `delta` and relative
//! standard deviation bound `c`:
//!
//! | rule                | `lambda`                                  | `n`                                               |
//! |---------------------|-------------------------------------------|---------------------------------------------------|
//! | `TailBalanced`      | `eps (1 - eps^2) / (c^2 + eps^2)`         | `ceil(2 (c^2 eps^-2 + 1) (1 - eps^2)^-1 ln(2/delta))` |
//! | `Prior`             | `eps / ((1 + eps) c^2)`                   | `ceil(2 c^2 eps^-2 (1 + eps)^2 ln(2/delta))`      |
//! | `Chebyshev`         | none (sample mean)                        | `ceil(c^2 eps^-2 delta^-1)`                       |
//! | `NormalReference`   | none                                      | `ceil(2 c^2 eps^-2 ln(2/delta))`                  |
//!
//! The gap `g` is the per-sample decay rate: the failure bound is
//! `2 (1 - g)^n <= 2 exp(-g n)`, so `n >= ln(2/delta) / g` suffices.
//! `NormalReference` is the leading term of the exact requirement for normal
//! data; it is a comparison target, not a guarantee.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanRule {
    /// The tail-balanced rule: smooth weight with the balanced `lambda`.
    TailBalanced,
    /// The earlier rule with `lambda = eps' / c^2`, `eps' = eps / (1 + eps)`.
    Prior,
    /// Sample mean sized by Chebyshev's inequality.
    Chebyshev,
    /// Normal-data reference size (not a guarantee).
    NormalReference,
}

impl PlanRule {
    pub const ALL: [PlanRule; 4] = [
        PlanRule::TailBalanced,
        PlanRule::Prior,
        PlanRule::Chebyshev,
        PlanRule::NormalReference,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PlanRule::TailBalanced => "tail-balanced",
            PlanRule::Prior => "prior",
            PlanRule::Chebyshev => "chebyshev",
            PlanRule::NormalReference => "normal-reference",
        }
    }

    /// Whether the resulting `n` carries an `(epsilon, delta)` guarantee.
    pub fn is_guarantee(self) -> bool {
        !matches!(self, PlanRule::NormalReference)
    }
}

impl fmt::Display for PlanRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PlanRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlanRule::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| Error::domain(format!("unknown plan rule `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub rule: PlanRule,
    pub lambda: Option<f64>,
    pub n: u64,
    pub gap: Option<f64>,
}

impl EstimatorPlan {
    /// `n` before the ceiling.
    pub fn n_unrounded(&self) -> f64 {
        unrounded_n(self.epsilon, self.delta, self.c, self.rule)
    }
}

pub fn validate_parameters(epsilon: f64, delta: f64, c: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!(
            "c must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

fn unrounded_n(epsilon: f64, delta: f64, c: f64, rule: PlanRule) -> f64 {
    let c2 = c * c;
    let e2 = epsilon * epsilon;
    let log_term = (2.0 / delta).ln();
    match rule {
        PlanRule::TailBalanced => 2.0 * (c2 / e2 + 1.0) / (1.0 - e2) * log_term,
        PlanRule::Prior => 2.0 * c2 / e2 * (1.0 + epsilon).powi(2) * log_term,
        PlanRule::Chebyshev => c2 / e2 / delta,
        PlanRule::NormalReference => 2.0 * c2 / e2 * log_term,
    }
}

/// Ceiling that ignores the last few ulps of representation error, so that
/// e.g. `1 / 0.1^2 / 1e-6` counts as exactly `1e8`.
fn ceil_count(x: f64) -> u64 {
    let nearest = x.round();
    let snapped = if (x - nearest).abs() <= 4.0 * f64::EPSILON * x.abs() {
        nearest
    } else {
        x.ceil()
    };
    snapped.max(1.0) as u64
}

pub fn plan(epsilon: f64, delta: f64, c: f64, rule: PlanRule) -> Result<EstimatorPlan> {
    validate_parameters(epsilon, delta, c)?;
    let c2 = c * c;
    let e2 = epsilon * epsilon;
    let lambda = match rule {
        PlanRule::TailBalanced => Some(epsilon * (1.0 - e2) / (c2 + e2)),
        PlanRule::Prior => Some(epsilon / (1.0 + epsilon) / c2),
        PlanRule::Chebyshev | PlanRule::NormalReference => None,
    };
    let gap = match rule {
        PlanRule::TailBalanced => Some(0.5 * e2 * (1.0 - e2) / (c2 + e2)),
        PlanRule::Prior => Some(e2 / (2.0 * c2 * (1.0 + epsilon).powi(2))),
        PlanRule::NormalReference => Some(e2 / (2.0 * c2)),
        PlanRule::Chebyshev => None,
    };
    Ok(EstimatorPlan {
        epsilon,
        delta,
        c,
        rule,
        lambda,
        n: ceil_count(unrounded_n(epsilon, delta, c, rule)),
        gap,
    })
}

/// All four rules for the same parameters, in [`PlanRule::ALL`] order.
pub fn plan_all(epsilon: f64, delta: f64, c: f64) -> Result<Vec<EstimatorPlan>> {
    PlanRule::ALL
        .iter()
        .map(|&r| plan(epsilon, delta, c, r))
        .collect()
}

/// Ratio of the tail-balanced sample size to the prior one, ignoring
/// ceilings: `(1 + eps^2/c^2) / ((1 + eps)^2 (1 - eps^2))`.
pub fn improvement_factor(epsilon: f64, c: f64) -> Result<f64> {
    validate_parameters(epsilon, 0.5, c)?;
    let e2 = epsilon * epsilon;
    Ok((1.0 + e2 / (c * c)) / ((1.0 + epsilon).powi(2) * (1.0 - e2)))
}

/// Best ratio attainable relative to the prior rule, `1 / (1 + eps)^2`, i.e.
/// the normal-data reference size over the prior size.
pub fn normal_limit_factor(epsilon: f64) -> Result<f64> {
    validate_parameters(epsilon, 0.5, 1.0)?;
    Ok(1.0 / (1.0 + epsilon).powi(2))
}
