//! Finite-sample error bounds for the multi-view and Tucker estimators.
//!
//! Each function returns only the estimation-error terms. The approximation
//! term `3 min_q ‖p − q‖₁` depends on the unknown density and is left to the
//! caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_counts(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(*v >= 1.0) || !v.is_finite() {
            return Err(Error::precondition(format!("{name} must be >= 1, got {v}")));
        }
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::precondition(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

fn confidence_term(n: f64, delta: f64) -> f64 {
    7.0 * ((3.0 / delta).ln() / (2.0 * n)).sqrt()
}

/// `7 sqrt(2 k^d log(4 k^d n) / n)`, the cost of estimating a Tucker core.
pub fn core_term(n: f64, d: f64, k: f64) -> f64 {
    let kd = k.powf(d);
    7.0 * (2.0 * kd * (4.0 * kd * n).ln() / n).sqrt()
}

/// `7 sqrt(2bdk log(4bdkn)/n) + 7 sqrt(log(3/δ)/(2n))`.
pub fn multiview_finite(n: f64, b: f64, d: f64, k: f64, delta: f64) -> Result<f64> {
    check_counts(&[("n", n), ("b", b), ("d", d), ("k", k)])?;
    check_delta(delta)?;
    let bdk = b * d * k;
    Ok(7.0 * (2.0 * bdk * (4.0 * bdk * n).ln() / n).sqrt() + confidence_term(n, delta))
}

/// `7 sqrt(2bdk log(4bdn)/n) + 7 sqrt(2k^d log(4k^d n)/n) + 7 sqrt(log(3/δ)/(2n))`.
pub fn tucker_finite(n: f64, b: f64, d: f64, k: f64, delta: f64) -> Result<f64> {
    check_counts(&[("n", n), ("b", b), ("d", d), ("k", k)])?;
    check_delta(delta)?;
    let bdk = b * d * k;
    Ok(7.0 * (2.0 * bdk * (4.0 * b * d * n).ln() / n).sqrt()
        + core_term(n, d, k)
        + confidence_term(n, delta))
}

/// Distribution-free bound over mixtures of `L`-Lipschitz components. At
/// `L = 2` both branches apply and `value` is the smaller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBound {
    pub value: f64,
    pub small_l: Option<f64>,
    pub large_l: Option<f64>,
}

fn class_terms(n: f64, d: f64, k: f64, l: f64) -> (Option<f64>, Option<f64>) {
    let small = (l <= 2.0).then(|| {
        d.sqrt() * k.cbrt() / n.cbrt()
            * (l.cbrt() * (l * l * (d - 1.0) / 24.0).exp() + 20.0 * (7.0 * d * n * k).ln().sqrt())
    });
    let large = (l >= 2.0).then(|| {
        21.0 * d * k.cbrt() * l.powf((d + 3.0) / 12.0) / n.cbrt() * (3.0 * l * d * k * n).ln().sqrt()
    });
    (small, large)
}

fn combine(small: Option<f64>, large: Option<f64>, extra: f64) -> ClassBound {
    let small_l = small.map(|v| v + extra);
    let large_l = large.map(|v| v + extra);
    let value = match (small_l, large_l) {
        (Some(s), Some(g)) => s.min(g),
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => unreachable!("every L >= 0 falls in a branch"),
    };
    ClassBound { value, small_l, large_l }
}

fn check_class(n: f64, d: f64, k: f64, l: f64, delta: f64) -> Result<()> {
    check_counts(&[("n", n), ("d", d), ("k", k)])?;
    check_delta(delta)?;
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::precondition(format!("L must be finite and >= 0, got {l}")));
    }
    Ok(())
}

pub fn multiview_class(n: f64, d: f64, k: f64, l: f64, delta: f64) -> Result<ClassBound> {
    check_class(n, d, k, l, delta)?;
    let (s, g) = class_terms(n, d, k, l);
    Ok(combine(s, g, confidence_term(n, delta)))
}

pub fn tucker_class(n: f64, d: f64, k: f64, l: f64, delta: f64) -> Result<ClassBound> {
    check_class(n, d, k, l, delta)?;
    let (s, g) = class_terms(n, d, k, l);
    Ok(combine(s, g, core_term(n, d, k) + confidence_term(n, delta)))
}
