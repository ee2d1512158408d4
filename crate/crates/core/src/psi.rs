//! Validated sample sets and the aggregate objective
//! `Psi(m) = (1/n) * sum_i lambda^-1 * d(lambda * (X_i/m - 1))`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::weights::{scaled_term_unchecked, WeightKind};

/// Nonnegative, finite draws with at least one strictly positive value.
///
/// The order statistics are computed once at construction; both solvers and
/// the objective itself (summation order) use them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sample set is empty"));
        }
        if let Some((i, x)) = values
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::domain(format!(
                "sample {i} is {x}; samples must be finite and nonnegative"
            )));
        }
        if !values.iter().any(|&x| x > 0.0) {
            return Err(Error::NoPositiveRoot("all samples are zero".into()));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(SampleSet { values, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Order statistics `X_(1) <= ... <= X_(n)`.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Index of the first strictly positive order statistic.
    pub fn first_positive(&self) -> usize {
        self.sorted.partition_point(|&x| x <= 0.0)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.sorted.iter().copied()) / self.len() as f64
    }

    /// Sample median; the average of the two middle values for even counts.
    pub fn median(&self) -> f64 {
        median_of_sorted(&self.sorted)
    }

    /// Consume into the original-order vector.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// `Psi_lambda(m)` for arbitrary real data, summed in the order given.
pub(crate) fn psi_unchecked(data: &[f64], m: f64, lambda: f64, kind: WeightKind) -> f64 {
    compensated_sum(
        data.iter()
            .map(|&x| scaled_term_unchecked(kind, x, m, lambda)),
    ) / data.len() as f64
}

/// `Psi_lambda(m)` over the sample set, summed over the order statistics so
/// the value does not depend on the input order.
pub fn psi_value(samples: &SampleSet, m: f64, lambda: f64, kind: WeightKind) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!(
            "m must be positive and finite, got {m}"
        )));
    }
    validate_lambda(lambda)?;
    Ok(psi_unchecked(samples.sorted(), m, lambda, kind))
}

/// `lim_{m -> 0+} Psi_lambda(m)`.
///
/// Zero-valued samples sit at `u = -lambda` for every `m`, positive ones run
/// off to `u = +inf`. When this limit is negative the objective is negative
/// on all of `(0, inf)` and no positive estimate exists.
pub fn psi_zero_limit(samples: &SampleSet, lambda: f64, kind: WeightKind) -> Result<f64> {
    validate_lambda(lambda)?;
    let zeros = samples.first_positive();
    let positives = samples.len() - zeros;
    let (at_zero, at_inf) = match kind {
        WeightKind::Mean => (-1.0, f64::INFINITY),
        _ => (
            kind.eval_unchecked(-lambda) / lambda,
            kind.eval_unchecked(f64::INFINITY) / lambda,
        ),
    };
    let zero_part = if zeros > 0 {
        zeros as f64 * at_zero
    } else {
        0.0
    };
    Ok((zero_part + positives as f64 * at_inf) / samples.len() as f64)
}

/// Whether `Psi_lambda` evaluated along `grid` is nonincreasing (ties allowed).
/// Intended for tests and diagnostics.
pub fn psi_is_nonincreasing_certificate(
    samples: &SampleSet,
    lambda: f64,
    kind: WeightKind,
    grid: &[f64],
) -> Result<bool> {
    if grid.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::domain("grid points must be positive and finite"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) == Some(Ordering::Greater))
    {
        return Err(Error::domain("grid must be sorted ascending"));
    }
    validate_lambda(lambda)?;
    let values: Vec<f64> = grid
        .iter()
        .map(|&m| psi_unchecked(samples.sorted(), m, lambda, kind))
        .collect();
    Ok(values.windows(2).all(|w| w[1] <= w[0]))
}
