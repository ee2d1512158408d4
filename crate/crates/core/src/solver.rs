//! Locating a zero of `Psi_lambda`.
//!
//! Two routes are provided:
//!
//! * [`solve_bisection`]: a binary search over the order statistics to find
//!   adjacent samples whose objective values straddle zero, followed by
//!   continuous bisection between them.
//! * [`solve_exact`]: for the smooth weight, `(0, inf)` splits into at most
//!   `2n + 1` windows on which the set of samples with `|u| <= 1` is fixed.
//!   Inside a window the zero condition is a cubic in `r = 1/m`, solved in
//!   closed form.
//!
//! A sample `x` is in the polynomial part of the weight iff
//! `x in [m (1 - 1/lambda)^+, m (1 + 1/lambda)]`, so window boundaries are
//! `m = lambda x / (lambda + 1)` (entry) and, for `lambda > 1`,
//! `m = lambda x / (lambda - 1)` (exit).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cubic::{real_roots, PolyRoots};
use crate::error::{Error, Result};
use crate::psi::{compensated_sum, psi_unchecked, psi_zero_limit, validate_lambda, SampleSet};
use crate::weights::{WeightKind, SMOOTH_PLATEAU};

/// Relative bisection tolerance used when the caller does not pick one.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Accepted `|Psi|` at an exact root, relative to `1 + |Psi(bracket_lo)|`.
pub const EXACT_RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Bisection,
    ExactCubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub estimate: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub method: SolverMethod,
    /// Objective evaluations spent searching (bisection), or windows
    /// examined (exact).
    pub evaluations: usize,
    /// For the exact method, the active order-statistic range `[start, end)`
    /// (0-based) of the window that produced the root.
    pub window: Option<(usize, usize)>,
    /// `Psi_lambda(estimate)`, computed after the search.
    pub residual: f64,
}

/// `1e-12 * X_(n)`. Scaling with the largest sample keeps the tolerance
/// meaningful for data of any magnitude.
pub fn default_tolerance(samples: &SampleSet) -> f64 {
    DEFAULT_RELATIVE_TOLERANCE * samples.max()
}

fn validate_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "tolerance must be positive and finite, got {tol}"
        )))
    }
}

fn validate_solver_kind(kind: WeightKind) -> Result<()> {
    match kind {
        WeightKind::LowerEnvelope | WeightKind::UpperEnvelope => Err(Error::domain(format!(
            "the {kind} weight is a bound, not an estimator weight"
        ))),
        _ => Ok(()),
    }
}

/// Binary search over order statistics, then continuous bisection until the
/// bracket is no wider than `tol` (or cannot be split further in `f64`).
/// Where `Psi` vanishes on an interval the left end is located, matching
/// [`solve_exact`]. An upper bracket end that is an exact zero of `Psi` is
/// reported as the estimate; otherwise the bracket midpoint is.
pub fn solve_bisection(
    samples: &SampleSet,
    lambda: f64,
    kind: WeightKind,
    tol: f64,
) -> Result<RootResult> {
    validate_lambda(lambda)?;
    validate_tol(tol)?;
    validate_solver_kind(kind)?;

    let sorted = samples.sorted();
    let n = sorted.len();
    let evaluations = std::cell::Cell::new(0usize);
    let psi = |m: f64| {
        evaluations.set(evaluations.get() + 1);
        psi_unchecked(sorted, m, lambda, kind)
    };

    // For the monotone weights Psi is nonincreasing, and the search narrows
    // onto inf{m > 0 : Psi(m) <= 0}, the smallest root. Psi(X_(n)) <= 0
    // always holds and Psi(X_(1)) >= 0 holds when X_(1) > 0, so neither end
    // is evaluated; Psi is undefined at m = 0 when the smallest sample is zero.
    let first_pos = samples.first_positive();
    let (mut a, mut b);
    // Whether Psi(b) is known to be exactly zero.
    let mut b_is_root = false;
    if first_pos > 0 && psi(sorted[first_pos]) <= 0.0 {
        evaluations.set(evaluations.get() + 1);
        if psi_zero_limit(samples, lambda, kind)? < 0.0 {
            return Err(Error::NoPositiveRoot(format!(
                "objective is negative on (0, inf); {first_pos} of {n} samples are zero"
            )));
        }
        a = 0.0;
        b = sorted[first_pos];
    } else {
        let (mut lo, mut hi) = (first_pos, n - 1);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let v = psi(sorted[mid]);
            if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
                b_is_root = v == 0.0;
            }
        }
        a = sorted[lo];
        b = sorted[hi];
    }

    while b - a > tol {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let v = psi(mid);
        if v > 0.0 {
            a = mid;
        } else {
            b = mid;
            b_is_root = v == 0.0;
        }
    }

    let estimate = if b_is_root { b } else { a + 0.5 * (b - a) };
    Ok(RootResult {
        estimate,
        bracket_lo: a,
        bracket_hi: b,
        method: SolverMethod::Bisection,
        evaluations: evaluations.get(),
        window: None,
        residual: psi_unchecked(sorted, estimate, lambda, kind),
    })
}

/// Bisection over `[min, max]` of arbitrary real draws, the plain form used
/// for the timing workload (whose draws may be negative). No sign structure
/// is assumed; the loop only narrows the bracket.
pub fn bisect_data_range(
    data: &[f64],
    lambda: f64,
    kind: WeightKind,
    tol: f64,
) -> Result<RootResult> {
    validate_lambda(lambda)?;
    validate_tol(tol)?;
    validate_solver_kind(kind)?;
    if data.is_empty() {
        return Err(Error::domain("no data"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("data must be finite"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut a, mut b) = (sorted[0], sorted[sorted.len() - 1]);
    let mut evaluations = 0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        evaluations += 1;
        if psi_unchecked(&sorted, mid, lambda, kind) < 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let estimate = 0.5 * (a + b);
    Ok(RootResult {
        estimate,
        bracket_lo: a,
        bracket_hi: b,
        method: SolverMethod::Bisection,
        evaluations,
        window: None,
        residual: psi_unchecked(&sorted, estimate, lambda, kind),
    })
}

/// Maximal interval of `m` on which the set of samples in the polynomial
/// part of the smooth weight is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Active order statistics, 0-based and half-open; may be empty.
    pub active: Range<usize>,
    pub m_lo: f64,
    /// `f64::INFINITY` for the last window.
    pub m_hi: f64,
}

impl Window {
    /// A point strictly inside the window.
    fn interior(&self) -> f64 {
        if self.m_hi.is_infinite() {
            2.0 * self.m_lo
        } else {
            0.5 * (self.m_lo + self.m_hi)
        }
    }
}

/// Active range `[i, j)` of order statistics with `|lambda (x/m - 1)| <= 1`.
fn active_range(sorted: &[f64], m: f64, lambda: f64) -> Range<usize> {
    let lower = (m * (1.0 - 1.0 / lambda)).max(0.0);
    let upper = m * (1.0 + 1.0 / lambda);
    let start = sorted.partition_point(|&x| x < lower);
    let end = sorted.partition_point(|&x| x <= upper);
    start..end.max(start)
}

/// Windows covering `(0, inf)` in increasing order of `m`.
pub fn enumerate_windows(samples: &SampleSet, lambda: f64) -> Result<Vec<Window>> {
    validate_lambda(lambda)?;
    let sorted = samples.sorted();
    let mut cuts: Vec<f64> = Vec::with_capacity(2 * sorted.len());
    for &x in sorted.iter().filter(|&&x| x > 0.0) {
        cuts.push(lambda * x / (lambda + 1.0));
        if lambda > 1.0 {
            cuts.push(lambda * x / (lambda - 1.0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    // Ties from duplicate samples (or rounding) collapse into one boundary.
    cuts.dedup_by(|b, a| *b - *a <= 4.0 * f64::EPSILON * *b);

    let mut windows: Vec<Window> = Vec::with_capacity(cuts.len() + 1);
    let bounds = std::iter::once(0.0)
        .chain(cuts.iter().copied())
        .zip(cuts.iter().copied().chain(std::iter::once(f64::INFINITY)));
    for (m_lo, m_hi) in bounds {
        let mut w = Window {
            active: 0..0,
            m_lo,
            m_hi,
        };
        w.active = active_range(sorted, w.interior(), lambda);
        match windows.last_mut() {
            Some(prev) if prev.active == w.active => prev.m_hi = m_hi,
            _ => windows.push(w),
        }
    }
    Ok(windows)
}

/// Coefficients `[c0, c1, c2, c3]` of the window equation in the centred
/// variable `t`, where `r = 1/m = r_ref (1 + t)`.
///
/// With `w_k = r_ref x_k`, `a_k = lambda (w_k - 1)` and `b_k = lambda w_k`,
/// each active sample contributes `u_k - u_k^3/6` with `u_k = a_k + b_k t`;
/// the plateaus add the constant `5/6 (above - below)`.
fn window_cubic(sorted: &[f64], active: &Range<usize>, lambda: f64, r_ref: f64) -> [f64; 4] {
    let n = sorted.len();
    let below = active.start as f64;
    let above = (n - active.end) as f64;
    let plateau = SMOOTH_PLATEAU * (above - below);
    let terms = sorted[active.clone()].iter().map(|&x| {
        let w = r_ref * x;
        (lambda * (w - 1.0), lambda * w)
    });
    let c0 = compensated_sum(
        std::iter::once(plateau).chain(terms.clone().map(|(a, _)| a - a * a * a / 6.0)),
    );
    let c1 = compensated_sum(terms.clone().map(|(a, b)| b * (1.0 - 0.5 * a * a)));
    let c2 = compensated_sum(terms.clone().map(|(a, b)| -0.5 * a * b * b));
    let c3 = compensated_sum(terms.map(|(_, b)| -b * b * b / 6.0));
    [c0, c1, c2, c3]
}

/// Exact zero of `Psi_lambda` for the smooth weight: the smallest root found
/// scanning windows in increasing `m`.
pub fn solve_exact(samples: &SampleSet, lambda: f64) -> Result<RootResult> {
    validate_lambda(lambda)?;
    let kind = WeightKind::Smooth;
    let sorted = samples.sorted();
    let zero_limit = psi_zero_limit(samples, lambda, kind)?;
    if zero_limit < 0.0 {
        return Err(Error::NoPositiveRoot(format!(
            "objective is negative on (0, inf); {} of {} samples are zero",
            samples.first_positive(),
            sorted.len()
        )));
    }
    let psi_at = |m: f64| {
        if m > 0.0 {
            psi_unchecked(sorted, m, lambda, kind)
        } else {
            zero_limit
        }
    };

    let windows = enumerate_windows(samples, lambda)?;
    for (examined, w) in windows.iter().enumerate() {
        let Some(m) = root_in_window(sorted, w, lambda) else {
            continue;
        };
        let residual = psi_at(m);
        let bracket_lo = w.m_lo.min(m);
        let bracket_hi = w.m_hi.min(samples.max()).max(m);
        if residual.abs() <= EXACT_RESIDUAL_TOLERANCE * (1.0 + psi_at(bracket_lo).abs()) {
            return Ok(RootResult {
                estimate: m,
                bracket_lo,
                bracket_hi,
                method: SolverMethod::ExactCubic,
                evaluations: examined + 1,
                window: Some((w.active.start, w.active.end)),
                residual,
            });
        }
    }
    Err(Error::Internal(format!(
        "no window of {} produced a root (lambda = {lambda}, n = {})",
        windows.len(),
        sorted.len()
    )))
}

fn root_in_window(sorted: &[f64], w: &Window, lambda: f64) -> Option<f64> {
    // Smallest point of a window on which Psi vanishes identically.
    let whole_window =
        || Some(if w.m_lo > 0.0 { w.m_lo } else { w.m_hi }).filter(|m| m.is_finite());

    let m_ref = if w.m_lo == 0.0 {
        0.5 * w.m_hi
    } else {
        w.interior()
    };
    let r_ref = 1.0 / m_ref;
    let coeffs = window_cubic(sorted, &w.active, lambda, r_ref);
    let roots = match real_roots(coeffs) {
        PolyRoots::All => return whole_window(),
        PolyRoots::Finite(r) => r,
    };
    if w.active.is_empty() {
        return None;
    }
    let slack = 1e-12;
    roots
        .into_iter()
        .filter(|&t| t > -1.0)
        .map(|t| 1.0 / (r_ref * (1.0 + t)))
        .filter(|&m| m.is_finite() && m >= w.m_lo * (1.0 - slack) && m <= w.m_hi * (1.0 + slack))
        .map(|m| m.clamp(w.m_lo, w.m_hi))
        .filter(|&m| m > 0.0)
        .min_by(f64::total_cmp)
}
