//! Finite L1 covers of the simplex, separable, multi-view and Tucker
//! probability tensor classes.
//!
//! Every cover is built from simplex grids `{c/m : c ∈ N^b, Σc = m}`. A point
//! of `Δ_b` is rounded onto the grid by largest-remainder apportionment,
//! which moves it by at most `b/(2m)` in L1, so `m = ⌈b/(2ε)⌉` gives an
//! `ε`-cover. Products and mixtures of grid points then cover the larger
//! classes with the radius split as follows:
//!
//! * separable: each of the `d` marginals at `ε/d`;
//! * multi-view: each component marginal at `ε/(2d)`, weights at `ε/2`;
//! * Tucker: each marginal at `ε/(2d)`, the `k^d` core at `ε/2`.
//!
//! Covers are lazy. Cardinality is computed analytically, rounding gives a
//! constructive nearest member, and members are only materialized under a cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    expand_multiview, expand_tucker, tensor_len, MultiViewFactors, ProbabilityTensor, TuckerFactors,
};

/// Default limit on the number of members a cover may materialize.
pub const DEFAULT_CAP: u128 = 1_000_000;

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::precondition(format!("cover radius must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// `C(n, r)`, saturating at `u128::MAX`.
pub fn binomial(n: u128, r: u128) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc * (n - r + i) / i stays integral at every step
        match acc.checked_mul(n - r + i) {
            Some(v) => acc = v / i,
            None => {
                let g = gcd(acc, i);
                let (a, den) = (acc / g, i / g);
                match a.checked_mul((n - r + i) / den) {
                    Some(v) if (n - r + i) % den == 0 => acc = v,
                    _ => return u128::MAX,
                }
            }
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sat_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// The grid `{c/m}` on `Δ_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplexGrid {
    pub bins: usize,
    pub resolution: usize,
}

impl SimplexGrid {
    /// The coarsest grid whose rounding error is at most `eps`.
    pub fn for_radius(bins: usize, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if bins == 0 {
            return Err(Error::structural("simplex dimension must be at least 1"));
        }
        let resolution = ((bins as f64) / (2.0 * eps)).ceil().max(1.0) as usize;
        Ok(SimplexGrid { bins, resolution })
    }

    /// Worst-case L1 rounding error, `b/(2m)`.
    pub fn radius(&self) -> f64 {
        self.bins as f64 / (2.0 * self.resolution as f64)
    }

    pub fn cardinality(&self) -> u128 {
        binomial((self.resolution + self.bins - 1) as u128, (self.bins - 1) as u128)
    }

    /// Largest-remainder rounding of `w` onto the grid. Ties in the
    /// remainder go to the lower index.
    pub fn round_counts(&self, w: &[f64]) -> Vec<usize> {
        debug_assert_eq!(w.len(), self.bins);
        let m = self.resolution;
        let scaled: Vec<f64> = w.iter().map(|x| x.max(0.0) * m as f64).collect();
        let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
        let used: usize = counts.iter().sum();
        if used > m {
            // only reachable through float drift in an input summing to ~1
            let mut order: Vec<usize> = (0..self.bins).collect();
            order.sort_by(|&a, &b| (scaled[a] - scaled[a].floor()).total_cmp(&(scaled[b] - scaled[b].floor())).then(b.cmp(&a)));
            let mut excess = used - m;
            for &i in order.iter().cycle() {
                if excess == 0 {
                    break;
                }
                if counts[i] > 0 {
                    counts[i] -= 1;
                    excess -= 1;
                }
            }
            return counts;
        }
        let mut order: Vec<usize> = (0..self.bins).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(m - used) {
            counts[i] += 1;
        }
        counts
    }

    pub fn round(&self, w: &[f64]) -> Vec<f64> {
        self.to_point(&self.round_counts(w))
    }

    pub fn to_point(&self, counts: &[usize]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / self.resolution as f64).collect()
    }

    /// All grid points, in lexicographic order of their counts.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut counts = vec![0usize; self.bins];
        compositions(self.resolution, 0, &mut counts, &mut |c| out.push(self.to_point(c)));
        out
    }
}

fn compositions(remaining: usize, pos: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        f(counts);
        return;
    }
    for c in (0..=remaining).rev() {
        counts[pos] = c;
        compositions(remaining - c, pos + 1, counts, f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverClass {
    Simplex,
    Separable,
    Multiview,
    Tucker,
}

/// A structured `ε`-cover of one of the probability tensor classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub class: CoverClass,
    pub dims: usize,
    pub bins: usize,
    pub k: usize,
    pub radius: f64,
    /// Grid for every marginal vector.
    pub marginal_grid: SimplexGrid,
    /// Grid for mixture weights or the Tucker core, if the class has one.
    pub mixing_grid: Option<SimplexGrid>,
}

pub fn cover_simplex(b: usize, eps: f64) -> Result<Cover> {
    Ok(Cover {
        class: CoverClass::Simplex,
        dims: 1,
        bins: b,
        k: 1,
        radius: eps,
        marginal_grid: SimplexGrid::for_radius(b, eps)?,
        mixing_grid: None,
    })
}

pub fn cover_separable(d: usize, b: usize, eps: f64) -> Result<Cover> {
    check_eps(eps)?;
    check_dims(d)?;
    Ok(Cover {
        class: CoverClass::Separable,
        dims: d,
        bins: b,
        k: 1,
        radius: eps,
        marginal_grid: SimplexGrid::for_radius(b, eps / d as f64)?,
        mixing_grid: None,
    })
}

pub fn cover_multiview(d: usize, b: usize, k: usize, eps: f64) -> Result<Cover> {
    check_eps(eps)?;
    check_dims(d)?;
    check_k(k)?;
    Ok(Cover {
        class: CoverClass::Multiview,
        dims: d,
        bins: b,
        k,
        radius: eps,
        marginal_grid: SimplexGrid::for_radius(b, eps / (2 * d) as f64)?,
        mixing_grid: Some(SimplexGrid::for_radius(k, eps / 2.0)?),
    })
}

pub fn cover_tucker(d: usize, b: usize, k: usize, eps: f64) -> Result<Cover> {
    check_eps(eps)?;
    check_dims(d)?;
    check_k(k)?;
    let core_len = tensor_len(d, k)?;
    Ok(Cover {
        class: CoverClass::Tucker,
        dims: d,
        bins: b,
        k,
        radius: eps,
        marginal_grid: SimplexGrid::for_radius(b, eps / (2 * d) as f64)?,
        mixing_grid: Some(SimplexGrid::for_radius(core_len, eps / 2.0)?),
    })
}

fn check_dims(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::structural("d must be at least 1"));
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::structural("k must be at least 1"));
    }
    Ok(())
}

/// A concrete cover member in factored form.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverMember {
    Vector(Vec<f64>),
    Multiview(MultiViewFactors),
    Tucker(TuckerFactors),
}

impl CoverMember {
    pub fn to_tensor(&self, b: usize) -> Result<ProbabilityTensor> {
        match self {
            CoverMember::Vector(v) => ProbabilityTensor::new(1, b, v.clone()),
            CoverMember::Multiview(f) => expand_multiview(f, b),
            CoverMember::Tucker(f) => expand_tucker(f, b),
        }
    }
}

impl Cover {
    /// Number of members, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        let g = self.marginal_grid.cardinality();
        match self.class {
            CoverClass::Simplex => g,
            CoverClass::Separable => sat_pow(g, self.dims),
            CoverClass::Multiview => {
                let sep = sat_pow(g, self.dims);
                let tuples = if sep == u128::MAX {
                    u128::MAX
                } else {
                    binomial(sep + self.k as u128 - 1, self.k as u128)
                };
                tuples.saturating_mul(self.mixing_grid.expect("multiview has weights").cardinality())
            }
            CoverClass::Tucker => sat_pow(g, self.dims * self.k)
                .saturating_mul(self.mixing_grid.expect("tucker has a core").cardinality()),
        }
    }

    /// Natural log of the covering-number bound for this class and radius.
    pub fn ln_size_bound(&self) -> f64 {
        let (b, d, k, e) = (self.bins as f64, self.dims as f64, self.k as f64, self.radius);
        match self.class {
            CoverClass::Simplex => b * (2.0 * b / e).ln(),
            CoverClass::Separable => b * d * (2.0 * b * d / e).ln(),
            CoverClass::Multiview => b * d * k * (4.0 * b * d / e).ln() + k * (4.0 * k / e).ln(),
            CoverClass::Tucker => {
                let kd = k.powf(d);
                b * d * k * (4.0 * b * d / e).ln() + kd * (4.0 * kd / e).ln()
            }
        }
    }

    pub fn within_size_bound(&self) -> bool {
        let card = self.cardinality();
        card != u128::MAX && (card as f64).ln() <= self.ln_size_bound() + 1e-12
    }

    fn check_marginal(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.bins {
            return Err(Error::structural(format!("vector of length {} for b={}", p.len(), self.bins)));
        }
        Ok(())
    }

    /// The member that rounding assigns to a simplex vector (simplex covers)
    /// or to a rank-one tensor given by its marginals (separable covers).
    pub fn nearest_separable(&self, marginals: &[Vec<f64>]) -> Result<CoverMember> {
        match self.class {
            CoverClass::Simplex => {
                let [p] = marginals else {
                    return Err(Error::structural("simplex cover expects one vector"));
                };
                self.check_marginal(p)?;
                Ok(CoverMember::Vector(self.marginal_grid.round(p)))
            }
            CoverClass::Separable => {
                if marginals.len() != self.dims {
                    return Err(Error::structural("one marginal per dimension expected"));
                }
                let rounded = marginals
                    .iter()
                    .map(|p| self.check_marginal(p).map(|_| vec![self.marginal_grid.round(p)]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CoverMember::Multiview(MultiViewFactors::new(vec![1.0], rounded)?))
            }
            _ => Err(Error::structural("use nearest_multiview or nearest_tucker for this class")),
        }
    }

    pub fn nearest_multiview(&self, f: &MultiViewFactors) -> Result<CoverMember> {
        if self.class != CoverClass::Multiview || f.dims() != self.dims || f.bins() != self.bins || f.k() != self.k {
            return Err(Error::structural("factors do not match the cover's class or shape"));
        }
        let marginals = f
            .marginals()
            .iter()
            .map(|per_mode| per_mode.iter().map(|p| self.marginal_grid.round(p)).collect())
            .collect();
        let weights = self.mixing_grid.expect("multiview has weights").round(f.weights());
        Ok(CoverMember::Multiview(MultiViewFactors::new(weights, marginals)?))
    }

    pub fn nearest_tucker(&self, f: &TuckerFactors) -> Result<CoverMember> {
        if self.class != CoverClass::Tucker || f.dims() != self.dims || f.bins() != self.bins || f.k() != self.k {
            return Err(Error::structural("factors do not match the cover's class or shape"));
        }
        let marginals = f
            .marginals()
            .iter()
            .map(|per_mode| per_mode.iter().map(|p| self.marginal_grid.round(p)).collect())
            .collect();
        let core = self.mixing_grid.expect("tucker has a core").round(f.core().values());
        let core = ProbabilityTensor::new(self.dims, self.k, core)?;
        Ok(CoverMember::Tucker(TuckerFactors::new(core, marginals)?))
    }

    /// Every member in factored form, or a resource error above `cap`.
    pub fn member_factors(&self, cap: u128) -> Result<Vec<CoverMember>> {
        let card = self.cardinality();
        if card > cap {
            return Err(Error::Resource {
                what: format!("{:?} cover (d={}, b={}, k={}, eps={})", self.class, self.dims, self.bins, self.k, self.radius)
                    .to_lowercase(),
                required: if card == u128::MAX { "more than 2^128".to_string() } else { card.to_string() },
                cap,
            });
        }
        let grid = self.marginal_grid.points();
        let mut out = Vec::with_capacity(card as usize);
        match self.class {
            CoverClass::Simplex => out.extend(grid.into_iter().map(CoverMember::Vector)),
            CoverClass::Separable => {
                for_each_tuple(grid.len(), self.dims, false, |idx| {
                    let m = idx.iter().map(|&i| vec![grid[i].clone()]).collect();
                    out.push(CoverMember::Multiview(MultiViewFactors::new(vec![1.0], m).expect("grid points are valid")));
                });
            }
            CoverClass::Multiview => {
                let mut separable = Vec::new();
                for_each_tuple(grid.len(), self.dims, false, |idx| separable.push(idx.to_vec()));
                let weights = self.mixing_grid.expect("multiview has weights").points();
                for_each_tuple(separable.len(), self.k, true, |comps| {
                    let marginals: Vec<Vec<Vec<f64>>> = (0..self.dims)
                        .map(|j| comps.iter().map(|&c| grid[separable[c][j]].clone()).collect())
                        .collect();
                    for w in &weights {
                        out.push(CoverMember::Multiview(
                            MultiViewFactors::new(w.clone(), marginals.clone()).expect("grid points are valid"),
                        ));
                    }
                });
            }
            CoverClass::Tucker => {
                let cores = self.mixing_grid.expect("tucker has a core").points();
                let (d, k) = (self.dims, self.k);
                for_each_tuple(grid.len(), d * k, false, |idx| {
                    let marginals: Vec<Vec<Vec<f64>>> =
                        (0..d).map(|j| (0..k).map(|s| grid[idx[j * k + s]].clone()).collect()).collect();
                    for c in &cores {
                        let core = ProbabilityTensor::new(d, k, c.clone()).expect("grid points are valid");
                        out.push(CoverMember::Tucker(
                            TuckerFactors::new(core, marginals.clone()).expect("grid points are valid"),
                        ));
                    }
                });
            }
        }
        Ok(out)
    }

    /// Every member as a dense tensor, or a resource error above `cap`.
    pub fn members(&self, cap: u128) -> Result<Vec<ProbabilityTensor>> {
        self.member_factors(cap)?.iter().map(|m| m.to_tensor(self.bins)).collect()
    }
}

/// Visit all length-`len` tuples over `0..n`; with `sorted`, only
/// nondecreasing ones (multisets).
fn for_each_tuple(n: usize, len: usize, sorted: bool, mut f: impl FnMut(&[usize])) {
    if n == 0 {
        return;
    }
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] + 1 < n {
                idx[pos] += 1;
                let v = if sorted { idx[pos] } else { 0 };
                for slot in idx[pos + 1..].iter_mut() {
                    *slot = v;
                }
                break;
            }
        }
    }
}
