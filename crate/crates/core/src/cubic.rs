//! Real roots of polynomials of degree at most three, in closed form.
//!
//! The cubic uses the Cardano form when there is one real root and the
//! trigonometric form when there are three, with the quadratic and linear
//! cases taken when leading coefficients vanish. Each closed-form root is
//! then polished with up to two Newton steps on the original coefficients,
//! kept only when they shrink the residual; this recovers the digits the
//! Cardano sum `A + Q/A` loses when the cubic term is tiny next to the
//! linear one.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum PolyRoots {
    /// The polynomial is identically zero.
    All,
    /// Real roots in ascending order (repeated roots appear repeatedly).
    Finite(Vec<f64>),
}

impl PolyRoots {
    pub fn roots(&self) -> &[f64] {
        match self {
            PolyRoots::All => &[],
            PolyRoots::Finite(r) => r,
        }
    }
}

/// Evaluate `c3 t^3 + c2 t^2 + c1 t + c0`.
#[inline]
pub fn eval_cubic(coeffs: [f64; 4], t: f64) -> f64 {
    let [c0, c1, c2, c3] = coeffs;
    ((c3 * t + c2) * t + c1) * t + c0
}

#[inline]
fn eval_derivative(coeffs: [f64; 4], t: f64) -> f64 {
    let [_, c1, c2, c3] = coeffs;
    (3.0 * c3 * t + 2.0 * c2) * t + c1
}

/// Real roots of `c3 t^3 + c2 t^2 + c1 t + c0`, coefficients given as
/// `[c0, c1, c2, c3]`.
pub fn real_roots(coeffs: [f64; 4]) -> PolyRoots {
    let [c0, c1, c2, c3] = coeffs;
    let mut roots = if c3 != 0.0 {
        cubic_roots(c2 / c3, c1 / c3, c0 / c3)
    } else if c2 != 0.0 {
        quadratic_roots(c2, c1, c0)
    } else if c1 != 0.0 {
        vec![-c0 / c1]
    } else if c0 == 0.0 {
        return PolyRoots::All;
    } else {
        Vec::new()
    };
    for r in roots.iter_mut() {
        *r = polish(coeffs, *r);
    }
    roots.sort_by(f64::total_cmp);
    PolyRoots::Finite(roots)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        let r = -b / (2.0 * a);
        return vec![r, r];
    }
    // Avoid subtracting nearly equal quantities.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { -r1 };
    vec![r1, r2]
}

/// Roots of the monic cubic `t^3 + a t^2 + b t + c`.
fn cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let shift = a / 3.0;
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    if q == 0.0 && r == 0.0 {
        return vec![-shift; 3];
    }
    let q3 = q * q * q;
    if q > 0.0 && r * r <= q3 {
        // Three real roots (two coincide when r^2 == q^3).
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let k = -2.0 * q.sqrt();
        vec![
            k * (theta / 3.0).cos() - shift,
            k * ((theta + 2.0 * PI) / 3.0).cos() - shift,
            k * ((theta - 2.0 * PI) / 3.0).cos() - shift,
        ]
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let small = if big != 0.0 { q / big } else { 0.0 };
        vec![big + small - shift]
    }
}

fn polish(coeffs: [f64; 4], mut t: f64) -> f64 {
    let mut residual = eval_cubic(coeffs, t).abs();
    for _ in 0..2 {
        if residual == 0.0 {
            break;
        }
        let slope = eval_derivative(coeffs, t);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = t - eval_cubic(coeffs, t) / slope;
        let next_residual = eval_cubic(coeffs, next).abs();
        if next.is_finite() && next_residual < residual {
            t = next;
            residual = next_residual;
        } else {
            break;
        }
    }
    t
}
