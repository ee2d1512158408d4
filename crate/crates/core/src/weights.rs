//! Weighted-difference functions `d(u)` and the scaled per-sample term.
//!
//! Every estimator in this crate is a zero of a sum of `d(u)` terms with
//! `u = lambda * (x / m - 1)`. The variants are:
//!
//! | variant           | `d(u)`                                                   |
//! |-------------------|----------------------------------------------------------|
//! | `Mean`            | `u`                                                      |
//! | `Median`          | `sign(u)`                                                |
//! | `Smooth`          | `u - u^3/6` on `[-1, 1]`, `+-5/6` outside                |
//! | `CatoniGuillini`  | `u - u^3/6` on `[-1, 1]`, `2*sqrt(2)/3` above `sqrt(2)`, `-sqrt(2)` below `-sqrt(2)` |
//! | `LowerEnvelope`   | `-ln(1 - u + u^2/2)`                                     |
//! | `UpperEnvelope`   | `ln(1 + u + u^2/2)`                                      |
//!
//! `CatoniGuillini` is the older weight used as the timing baseline. It is
//! zero on `(1, sqrt(2)]` and `[-sqrt(2), -1)`, so it is neither continuous nor
//! monotone; that shape is kept as-is.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plateau level of the smooth weight, equal to `1 - 1/6`.
pub const SMOOTH_PLATEAU: f64 = 5.0 / 6.0;

const CG_UPPER_LEVEL: f64 = 2.0 * SQRT_2 / 3.0;
const CG_LOWER_LEVEL: f64 = SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Mean,
    Median,
    #[default]
    Smooth,
    CatoniGuillini,
    LowerEnvelope,
    UpperEnvelope,
}

impl WeightKind {
    pub const ALL: [WeightKind; 6] = [
        WeightKind::Mean,
        WeightKind::Median,
        WeightKind::Smooth,
        WeightKind::CatoniGuillini,
        WeightKind::LowerEnvelope,
        WeightKind::UpperEnvelope,
    ];

    /// Whether `d` is nondecreasing, which is what the solvers rely on to
    /// bracket a zero. The envelopes are not (`ln(1 + u + u^2/2)` turns
    /// around at `u = -1`), and `CatoniGuillini` dips to zero past `u = 1`.
    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            WeightKind::Mean | WeightKind::Median | WeightKind::Smooth
        )
    }

    /// Evaluate `d(u)` without a domain check. Non-finite `u` is handled the
    /// way the branch structure dictates (infinities land on plateaus).
    #[inline]
    pub fn eval_unchecked(self, u: f64) -> f64 {
        match self {
            WeightKind::Mean => u,
            WeightKind::Median => median_weight(u),
            WeightKind::Smooth => smooth_weight(u),
            WeightKind::CatoniGuillini => catoni_guillini_weight(u),
            WeightKind::LowerEnvelope => -upper_envelope(-u),
            WeightKind::UpperEnvelope => upper_envelope(u),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WeightKind::Mean => "mean",
            WeightKind::Median => "median",
            WeightKind::Smooth => "smooth",
            WeightKind::CatoniGuillini => "catoni-guillini",
            WeightKind::LowerEnvelope => "lower-envelope",
            WeightKind::UpperEnvelope => "upper-envelope",
        }
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .or(match s {
                "cg" => Some(WeightKind::CatoniGuillini),
                "h" => Some(WeightKind::Smooth),
                _ => None,
            })
            .ok_or_else(|| Error::domain(format!("unknown weight kind `{s}`")))
    }
}

/// `d(u)` for the given weight. Rejects non-finite `u`.
pub fn eval_weight(kind: WeightKind, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::domain(format!(
            "weight argument must be finite, got {u}"
        )));
    }
    Ok(kind.eval_unchecked(u))
}

/// `lambda^-1 * d(lambda * (x/m - 1))`.
pub fn scaled_term(kind: WeightKind, x: f64, m: f64, lambda: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!(
            "m must be positive and finite, got {m}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain(format!(
            "x must be nonnegative and finite, got {x}"
        )));
    }
    Ok(scaled_term_unchecked(kind, x, m, lambda))
}

#[inline]
pub(crate) fn scaled_term_unchecked(kind: WeightKind, x: f64, m: f64, lambda: f64) -> f64 {
    match kind {
        // lambda cancels exactly for the linear weight
        WeightKind::Mean => x / m - 1.0,
        _ => kind.eval_unchecked(lambda * (x / m - 1.0)) / lambda,
    }
}

#[inline]
fn cubic_part(u: f64) -> f64 {
    u - u * u * u / 6.0
}

#[inline]
fn smooth_weight(u: f64) -> f64 {
    if u > 1.0 {
        SMOOTH_PLATEAU
    } else if u < -1.0 {
        -SMOOTH_PLATEAU
    } else {
        cubic_part(u)
    }
}

#[inline]
fn median_weight(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn catoni_guillini_weight(u: f64) -> f64 {
    let mut d = 0.0;
    if u > CG_LOWER_LEVEL {
        d += CG_UPPER_LEVEL;
    }
    if u < -CG_LOWER_LEVEL {
        d -= CG_LOWER_LEVEL;
    }
    if (-1.0..=1.0).contains(&u) {
        d += cubic_part(u);
    }
    d
}

// Taylor coefficients of ln(1 + u + u^2/2) - (u - u^3/6), starting at u^4.
// The series converges for |u| < sqrt(2); it is only used for |u| <= 1/4.
const UPPER_REMAINDER_SERIES: [f64; 24] = [
    1.0 / 8.0,
    -1.0 / 20.0,
    0.0,
    1.0 / 56.0,
    -1.0 / 64.0,
    1.0 / 144.0,
    0.0,
    -1.0 / 352.0,
    1.0 / 384.0,
    -1.0 / 832.0,
    0.0,
    1.0 / 1920.0,
    -1.0 / 2048.0,
    1.0 / 4352.0,
    0.0,
    -1.0 / 9728.0,
    1.0 / 10240.0,
    -1.0 / 21504.0,
    0.0,
    1.0 / 47104.0,
    -1.0 / 49152.0,
    1.0 / 102400.0,
    0.0,
    -1.0 / 221184.0,
];

/// `ln(1 + u + u^2/2)`.
///
/// Near zero this is evaluated as `(u - u^3/6) + remainder` with the
/// remainder summed from its series, so the computed value never drops
/// below the smooth weight's polynomial through cancellation.
fn upper_envelope(u: f64) -> f64 {
    if u.abs() <= 0.25 {
        let tail = UPPER_REMAINDER_SERIES
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * u + c);
        let u2 = u * u;
        cubic_part(u) + u2 * u2 * tail
    } else {
        (u + 0.5 * u * u).ln_1p()
    }
}
