//! Closed-form Lipschitz approximation theory for histograms.
//!
//! Densities are continuous piecewise-linear functions on `[0, 1]`, so every
//! bin integral, squared norm and absolute deviation is computed exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A piecewise-linear function on `[0, 1]`: on `[breaks[i], breaks[i+1]]`
/// it equals `slopes[i] * x + intercepts[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    breaks: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

/// `(b − a)(h_a² + h_a h_b + h_b²)/3`, the integral of the square of a
/// linear function with end values `h_a`, `h_b`.
fn sq_integral(len: f64, ha: f64, hb: f64) -> f64 {
    len * (ha * ha + ha * hb + hb * hb) / 3.0
}

/// Integral of `|h|` for a linear `h` with end values `h_a`, `h_b`.
fn abs_integral(len: f64, ha: f64, hb: f64) -> f64 {
    if ha * hb >= 0.0 {
        len * (ha + hb).abs() / 2.0
    } else {
        len * (ha * ha + hb * hb) / (2.0 * (ha.abs() + hb.abs()))
    }
}

impl PiecewiseLinear {
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || slopes.len() != breaks.len() - 1 || intercepts.len() != slopes.len() {
            return Err(Error::structural(
                "need m+1 breakpoints and m slopes and intercepts, m >= 1",
            ));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::structural("breakpoints must start at 0 and end at 1"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::structural("breakpoints must be strictly increasing"));
        }
        if slopes.iter().chain(&intercepts).any(|v| !v.is_finite()) {
            return Err(Error::structural("non-finite slope or intercept"));
        }
        Ok(PiecewiseLinear { breaks, slopes, intercepts })
    }

    /// The continuous interpolant of `(xs[i], ys[i])`.
    pub fn from_knots(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::structural("need at least two knots with matching values"));
        }
        let mut slopes = Vec::with_capacity(xs.len() - 1);
        let mut intercepts = Vec::with_capacity(xs.len() - 1);
        for i in 0..xs.len() - 1 {
            let s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            slopes.push(s);
            intercepts.push(ys[i] - s * xs[i]);
        }
        PiecewiseLinear::new(xs.to_vec(), slopes, intercepts)
    }

    /// `x ↦ slope * x + intercept` on all of `[0, 1]`.
    pub fn linear(slope: f64, intercept: f64) -> Result<Self> {
        PiecewiseLinear::new(vec![0.0, 1.0], vec![slope], vec![intercept])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.slopes.len())
            .map(move |i| (self.breaks[i], self.breaks[i + 1], self.slopes[i], self.intercepts[i]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breaks[1..self.breaks.len() - 1].partition_point(|&t| t <= x);
        self.slopes[i] * x + self.intercepts[i]
    }

    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Pieces of `f` restricted to `[a, b]` as `(lo, hi, f(lo), f(hi))`.
    fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.segments().filter_map(move |(s0, s1, m, c)| {
            let lo = s0.max(a);
            let hi = s1.min(b);
            (hi > lo).then(|| (lo, hi, m * lo + c, m * hi + c))
        })
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b).map(|(lo, hi, fa, fb)| (hi - lo) * (fa + fb) / 2.0).sum()
    }

    /// `∫_a^b (f − c)^2`.
    pub fn sq_dev(&self, a: f64, b: f64, c: f64) -> f64 {
        self.pieces(a, b).map(|(lo, hi, fa, fb)| sq_integral(hi - lo, fa - c, fb - c)).sum()
    }

    /// `∫_a^b |f − c|`.
    pub fn abs_dev(&self, a: f64, b: f64, c: f64) -> f64 {
        self.pieces(a, b).map(|(lo, hi, fa, fb)| abs_integral(hi - lo, fa - c, fb - c)).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.sq_dev(0.0, 1.0, 0.0)
    }
}

/// A nonnegative piecewise-linear function with unit integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseLinear", into = "PiecewiseLinear")]
pub struct PiecewiseLinearDensity(PiecewiseLinear);

impl From<PiecewiseLinearDensity> for PiecewiseLinear {
    fn from(d: PiecewiseLinearDensity) -> Self {
        d.0
    }
}

impl TryFrom<PiecewiseLinear> for PiecewiseLinearDensity {
    type Error = Error;
    fn try_from(f: PiecewiseLinear) -> Result<Self> {
        PiecewiseLinearDensity::new(f)
    }
}

impl PiecewiseLinearDensity {
    pub fn new(f: PiecewiseLinear) -> Result<Self> {
        let min_end = f
            .segments()
            .map(|(a, b, m, c)| (m * a + c).min(m * b + c))
            .fold(f64::INFINITY, f64::min);
        if min_end < -1e-12 {
            return Err(Error::structural(format!("density takes negative value {min_end}")));
        }
        let total = f.integral(0.0, 1.0);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::structural(format!("density integrates to {total}, not 1")));
        }
        Ok(PiecewiseLinearDensity(f))
    }

    /// Scale a nonnegative piecewise-linear function to unit mass.
    pub fn normalized(f: PiecewiseLinear) -> Result<Self> {
        let total = f.integral(0.0, 1.0);
        if !(total > 0.0) {
            return Err(Error::structural("function has no positive mass"));
        }
        let PiecewiseLinear { breaks, slopes, intercepts } = f;
        let scaled = PiecewiseLinear::new(
            breaks,
            slopes.iter().map(|s| s / total).collect(),
            intercepts.iter().map(|c| c / total).collect(),
        )?;
        PiecewiseLinearDensity::new(scaled)
    }

    pub fn function(&self) -> &PiecewiseLinear {
        &self.0
    }

    pub fn uniform() -> Self {
        PiecewiseLinearDensity(PiecewiseLinear::linear(0.0, 1.0).expect("valid"))
    }

    /// The point `x` with `∫_0^x f = u`, for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, m, c) in self.0.segments() {
            let (fa, fb) = (m * a + c, m * b + c);
            let mass = (b - a) * (fa + fb) / 2.0;
            if acc + mass >= u && mass > 0.0 {
                let t = u - acc;
                // solve fa*y + m*y^2/2 = t in the cancellation-free form
                let root = (fa * fa + 2.0 * m * t).max(0.0).sqrt();
                let y = if fa + root > 0.0 { 2.0 * t / (fa + root) } else { 0.0 };
                return (a + y).clamp(a, b);
            }
            acc += mass;
        }
        1.0
    }

    /// One draw by inversion.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

impl std::ops::Deref for PiecewiseLinearDensity {
    type Target = PiecewiseLinear;
    fn deref(&self) -> &PiecewiseLinear {
        &self.0
    }
}

fn check_l(l: f64) -> Result<()> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::precondition(format!("Lipschitz constant must be finite and >= 0, got {l}")));
    }
    Ok(())
}

/// `m_L`, the largest L2 norm of an `L`-Lipschitz density on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ML {
    pub m_sq: f64,
    pub m: f64,
}

pub fn m_l(l: f64) -> Result<ML> {
    check_l(l)?;
    let m_sq = if l <= 2.0 { l * l / 12.0 + 1.0 } else { (8.0 * l / 9.0).sqrt() };
    Ok(ML { m_sq, m: m_sq.sqrt() })
}

/// The `L`-Lipschitz nonnegative function with mass `U` of largest L2 norm:
/// `(x − 1/2)L + U` when `L <= 2U`, else `L (x − 1 + sqrt(2U/L))_+`.
pub fn extremal_density(u: f64, l: f64) -> Result<PiecewiseLinear> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::precondition(format!("mass U must be positive, got {u}")));
    }
    check_l(l)?;
    if l <= 2.0 * u {
        PiecewiseLinear::linear(l, u - l / 2.0)
    } else {
        let start = 1.0 - (2.0 * u / l).sqrt();
        PiecewiseLinear::new(vec![0.0, start, 1.0], vec![0.0, l], vec![0.0, -l * start])
    }
}

/// `M(U, L) = W³L²/12 + U²/W` with `W = min(1, sqrt(2U/L))`.
pub fn m_value(u: f64, l: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::precondition(format!("mass U must be positive, got {u}")));
    }
    check_l(l)?;
    let w = if l <= 2.0 * u { 1.0 } else { (2.0 * u / l).sqrt() };
    Ok(w.powi(3) * l * l / 12.0 + u * u / w)
}

fn check_bins(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::structural("b must be at least 1"));
    }
    Ok(())
}

/// Bin masses `w_i = ∫_{(i−1)/b}^{i/b} f`, the L2 projection onto `b`-bin
/// histograms expressed as weights.
pub fn project_density_to_histogram(f: &PiecewiseLinearDensity, b: usize) -> Result<Vec<f64>> {
    check_bins(b)?;
    let bf = b as f64;
    Ok((0..b).map(|i| f.integral(i as f64 / bf, (i + 1) as f64 / bf)).collect())
}

/// `‖f − Σ_i b w_i 1_{bin i}‖₂²` for arbitrary bin weights `w`.
pub fn histogram_l2_error_sq(f: &PiecewiseLinear, w: &[f64]) -> f64 {
    let bf = w.len() as f64;
    w.iter()
        .enumerate()
        .map(|(i, wi)| f.sq_dev(i as f64 / bf, (i + 1) as f64 / bf, wi * bf))
        .sum()
}

/// `‖f − Σ_i b w_i 1_{bin i}‖₁` for arbitrary bin weights `w`.
pub fn histogram_l1_error(f: &PiecewiseLinear, w: &[f64]) -> f64 {
    let bf = w.len() as f64;
    w.iter()
        .enumerate()
        .map(|(i, wi)| f.abs_dev(i as f64 / bf, (i + 1) as f64 / bf, wi * bf))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparableBias {
    /// Bound on the squared L2 projection error.
    pub l2_sq: f64,
    /// Its square root, which bounds the L1 error on the unit cube.
    pub l1: f64,
}

fn check_bias_domain(l: f64, b: usize) -> Result<()> {
    check_l(l)?;
    check_bins(b)?;
    if ((b * b) as f64) < l * l / 12.0 {
        return Err(Error::precondition(format!("need b^2 >= L^2/12, got b={b}, L={l}")));
    }
    Ok(())
}

/// `m_L^{2d} − (m_L² − L²/(12b²))^d`, bounding the squared L2 distance from a
/// product of `d` `L`-Lipschitz densities to its histogram projection.
pub fn separable_l2_bias_bound(l: f64, b: usize, d: usize) -> Result<SeparableBias> {
    check_bias_domain(l, b)?;
    if d == 0 {
        return Err(Error::structural("d must be at least 1"));
    }
    let m_sq = m_l(l)?.m_sq;
    let shrink = l * l / (12.0 * (b * b) as f64);
    // x^d − y^d = (x − y) Σ_j x^j y^{d−1−j}, without the cancellation
    let y = m_sq - shrink;
    let l2_sq = shrink * (0..d).map(|j| m_sq.powi(j as i32) * y.powi((d - 1 - j) as i32)).sum::<f64>();
    Ok(SeparableBias { l2_sq, l1: l2_sq.sqrt() })
}

/// Both branches of the simplified projection bound. At `L = 2` both apply
/// and `value` is the smaller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjBound {
    pub value: f64,
    /// `d L² exp((d−1)L²/12) / (12 b²)`, valid for `L <= 2`.
    pub small_l: Option<f64>,
    /// `d L^{(d+3)/2} (√8/3)^{d−1} / (12 b²)`, valid for `L >= 2`.
    pub large_l: Option<f64>,
}

pub fn l2projbnd(l: f64, b: usize, d: usize) -> Result<ProjBound> {
    check_l(l)?;
    check_bins(b)?;
    if d == 0 {
        return Err(Error::structural("d must be at least 1"));
    }
    let (df, b2) = (d as f64, (b * b) as f64);
    let small_l = (l <= 2.0).then(|| df * l * l / (12.0 * b2) * ((df - 1.0) * l * l / 12.0).exp());
    let large_l = if l >= 2.0 {
        check_bias_domain(l, b)?;
        Some(df * l.powf((df + 3.0) / 2.0) / (12.0 * b2) * (8f64.sqrt() / 3.0).powi(d as i32 - 1))
    } else {
        None
    };
    let value = match (small_l, large_l) {
        (Some(s), Some(g)) => s.min(g),
        (Some(s), None) => s,
        (None, Some(g)) => g,
        (None, None) => unreachable!("every L >= 0 falls in a branch"),
    };
    Ok(ProjBound { value, small_l, large_l })
}

/// The best L1 approximation error of `f_L` by a `b`-bin histogram, where
/// `f_L` is the extremal density with unit mass.
pub fn exact_l1_hist_error(l: f64, b: usize) -> Result<f64> {
    check_l(l)?;
    check_bins(b)?;
    let bf = b as f64;
    if l <= 2.0 {
        return Ok(l / (4.0 * bf));
    }
    let ratio = bf / (l / 2.0).sqrt();
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(Error::precondition(format!(
            "for L > 2 the bin count must be a multiple of sqrt(L/2) = {}, got b={b}",
            (l / 2.0).sqrt()
        )));
    }
    Ok((2.0 * l).sqrt() / (4.0 * bf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    /// Mean of the segment over the interval.
    pub alpha: f64,
    /// `|L|(b − a)²/4`, the L1 error of `alpha`.
    pub l1_cost: f64,
    /// `L²(b − a)³/12`, the squared L2 error of `alpha`.
    pub l2_cost: f64,
}

/// Best constant approximation of `x ↦ slope·x + intercept` on `[a, b]`.
pub fn best_constant_on_interval(slope: f64, intercept: f64, a: f64, b: f64) -> Result<ConstantFit> {
    if !(a < b) {
        return Err(Error::precondition(format!("need a < b, got a={a}, b={b}")));
    }
    let w = b - a;
    Ok(ConstantFit {
        alpha: slope * (a + b) / 2.0 + intercept,
        l1_cost: slope.abs() * w * w / 4.0,
        l2_cost: slope * slope * w * w * w / 12.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_l_values() {
        assert_eq!(m_l(0.0).unwrap().m_sq, 1.0);
        assert!((m_l(2.0).unwrap().m_sq - 4.0 / 3.0).abs() < 1e-15);
        assert!((m_l(8.0).unwrap().m_sq - 8.0 / 3.0).abs() < 1e-15);
        assert!(m_l(-1.0).is_err());
        assert!(m_l(f64::NAN).is_err());
    }

    #[test]
    fn m_value_branches_meet() {
        assert!((m_value(1.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((m_value(1.0, 8.0).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        for u in [0.5, 1.0, 3.0] {
            let l = 2.0 * u;
            let upper = m_value(u, l * (1.0 + 1e-15)).unwrap();
            assert!((m_value(u, l).unwrap() - upper).abs() < 1e-12);
        }
    }

    #[test]
    fn extremal_densities() {
        let f = extremal_density(1.0, 2.0).unwrap();
        assert_eq!(f.eval(0.3), 0.6);
        assert!((f.l2_norm_sq() - 4.0 / 3.0).abs() < 1e-15);
        let f = extremal_density(1.0, 8.0).unwrap();
        assert_eq!(f.eval(0.25), 0.0);
        assert_eq!(f.eval(0.75), 2.0);
        assert!((f.integral(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((f.l2_norm_sq() - 8.0 / 3.0).abs() < 1e-14);
        let g = extremal_density(3.0, 1.0).unwrap();
        assert!((g.integral(0.0, 1.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let f = PiecewiseLinearDensity::new(PiecewiseLinear::linear(2.0, 0.0).unwrap()).unwrap();
        assert_eq!(project_density_to_histogram(&f, 2).unwrap(), vec![0.25, 0.75]);
        let u = PiecewiseLinearDensity::uniform();
        assert_eq!(project_density_to_histogram(&u, 4).unwrap(), vec![0.25; 4]);
        let w = project_density_to_histogram(&f, 5).unwrap();
        assert!((histogram_l2_error_sq(&f, &w) - 4.0 / (12.0 * 25.0)).abs() < 1e-15);
    }

    #[test]
    fn separable_examples() {
        let d1 = separable_l2_bias_bound(2.0, 3, 1).unwrap();
        assert!((d1.l2_sq - 4.0 / (12.0 * 9.0)).abs() < 1e-15);
        let v = separable_l2_bias_bound(2.0, 2, 2).unwrap();
        assert!((v.l2_sq - (16.0 / 9.0 - 1.5625)).abs() < 1e-14);
        assert_eq!(separable_l2_bias_bound(0.0, 5, 4).unwrap().l2_sq, 0.0);
        assert!(matches!(separable_l2_bias_bound(8.0, 2, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn l2projbnd_values() {
        for b in [1, 3, 10] {
            let p = l2projbnd(2.0, b, 1).unwrap();
            let want = 1.0 / (3.0 * (b * b) as f64);
            assert!((p.small_l.unwrap() - want).abs() < 1e-15);
            assert!((p.large_l.unwrap() - want).abs() < 1e-15);
        }
        let p = l2projbnd(2.0, 4, 3).unwrap();
        assert!(p.small_l.unwrap() > p.large_l.unwrap());
        assert_eq!(p.value, p.large_l.unwrap());
        assert!(l2projbnd(1.0, 4, 3).unwrap().large_l.is_none());
    }

    #[test]
    fn exact_l1_examples() {
        assert_eq!(exact_l1_hist_error(2.0, 4).unwrap(), 0.125);
        assert_eq!(exact_l1_hist_error(8.0, 2).unwrap(), 0.5);
        assert_eq!(exact_l1_hist_error(0.0, 7).unwrap(), 0.0);
        assert!(matches!(exact_l1_hist_error(8.0, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn best_constant_examples() {
        let c = best_constant_on_interval(2.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!((c.alpha, c.l1_cost), (1.0, 0.5));
        let c = best_constant_on_interval(0.0, 3.0, 0.2, 0.7).unwrap();
        assert_eq!((c.alpha, c.l1_cost, c.l2_cost), (3.0, 0.0, 0.0));
        let c = best_constant_on_interval(1.0, 0.0, 0.0, 0.5).unwrap();
        assert_eq!((c.alpha, c.l1_cost), (0.25, 1.0 / 16.0));
        assert!(best_constant_on_interval(1.0, 0.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn abs_dev_matches_segment_formula() {
        let f = PiecewiseLinear::linear(3.0, 0.5).unwrap();
        for (a, b) in [(0.0, 1.0), (0.1, 0.4), (0.6, 0.65)] {
            let c = best_constant_on_interval(3.0, 0.5, a, b).unwrap();
            assert!((f.abs_dev(a, b, c.alpha) - c.l1_cost).abs() < 1e-14);
            assert!((f.sq_dev(a, b, c.alpha) - c.l2_cost).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let f = PiecewiseLinearDensity::normalized(PiecewiseLinear::from_knots(&[0.0, 0.3, 1.0], &[1.0, 4.0, 0.5]).unwrap()).unwrap();
        for u in [0.0, 0.1, 0.35, 0.5, 0.9, 1.0] {
            let x = f.quantile(u);
            assert!((f.integral(0.0, x) - u).abs() < 1e-12, "u={u}");
        }
        let g = extremal_density(1.0, 8.0).unwrap();
        let g = PiecewiseLinearDensity::new(g).unwrap();
        assert!((g.quantile(0.5) - (0.5 + 0.5 * 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(PiecewiseLinearDensity::new(PiecewiseLinear::linear(0.0, 2.0).unwrap()).is_err());
        assert!(PiecewiseLinearDensity::new(PiecewiseLinear::linear(4.0, -1.0).unwrap()).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.5], vec![1.0], vec![0.0]).is_err());
        let f = PiecewiseLinearDensity::normalized(PiecewiseLinear::from_knots(&[0.0, 0.3, 1.0], &[1.0, 4.0, 0.5]).unwrap()).unwrap();
        assert!((f.integral(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((f.eval(0.3) - 4.0 / 2.325).abs() < 1e-12);
    }
}
