//! Probability tensors and their factored (multi-view and Tucker) forms.
//!
//! A probability tensor of order `d` with `b` bins per mode stores `b^d`
//! nonnegative entries summing to one, in row-major order over 1-based
//! multi-indices `(A_1, ..., A_d)` with `A_1` most significant.
//!
//! Factored forms keep their per-mode vectors as `marginals[mode][component]`,
//! each a probability vector of length `b`.

use serde::{Deserialize, Serialize};

use crate::dense::{outer, Dense, Mat};
use crate::error::{Error, Result};

/// Largest number of entries a dense tensor may hold.
pub const MAX_TENSOR_LEN: usize = 10_000_000;

/// Entry sums within this distance of one are accepted unchanged.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Entry sums within this distance of one are renormalized; larger
/// deviations are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// `b^d`, or a resource error if it exceeds [`MAX_TENSOR_LEN`].
pub fn tensor_len(dims: usize, bins: usize) -> Result<usize> {
    if dims == 0 || bins == 0 {
        return Err(Error::structural(format!(
            "tensor needs dims >= 1 and bins >= 1, got dims={dims}, bins={bins}"
        )));
    }
    let mut len: usize = 1;
    for _ in 0..dims {
        len = match len.checked_mul(bins) {
            Some(l) if l <= MAX_TENSOR_LEN => l,
            _ => {
                return Err(Error::Resource {
                    what: format!("dense tensor with {bins}^{dims} entries"),
                    required: format!("{}", (bins as f64).powi(dims as i32)),
                    cap: MAX_TENSOR_LEN as u128,
                })
            }
        };
    }
    Ok(len)
}

/// Check that `v` is a probability vector, renormalizing small drift.
pub fn check_simplex(v: &[f64], what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::structural(format!("{what}: empty vector")));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::structural(format!(
            "{what}: entries must be finite and nonnegative, found {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev <= SUM_TOLERANCE {
        Ok(v.to_vec())
    } else if dev <= RENORMALIZE_TOLERANCE {
        Ok(v.iter().map(|x| x / sum).collect())
    } else {
        Err(Error::structural(format!("{what}: entries sum to {sum}, expected 1")))
    }
}

/// A 1-based index into a tensor of order `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, bins: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::structural("multi-index must have at least one entry"));
        }
        if let Some(a) = entries.iter().find(|&&a| a == 0 || a > bins) {
            return Err(Error::structural(format!("multi-index entry {a} outside [1, {bins}]")));
        }
        Ok(MultiIndex(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Row-major flat offset.
    pub fn offset(&self, bins: usize) -> usize {
        self.0.iter().fold(0, |acc, &a| acc * bins + (a - 1))
    }

    pub fn from_offset(mut offset: usize, dims: usize, bins: usize) -> Self {
        let mut entries = vec![0; dims];
        for slot in entries.iter_mut().rev() {
            *slot = offset % bins + 1;
            offset /= bins;
        }
        MultiIndex(entries)
    }
}

#[derive(Deserialize)]
struct RawTensor {
    dims: usize,
    bins: usize,
    values: Vec<f64>,
}

/// A nonnegative tensor in `R^{b×…×b}` whose entries sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct ProbabilityTensor {
    dims: usize,
    bins: usize,
    values: Vec<f64>,
}

impl TryFrom<RawTensor> for ProbabilityTensor {
    type Error = Error;
    fn try_from(raw: RawTensor) -> Result<Self> {
        ProbabilityTensor::new(raw.dims, raw.bins, raw.values)
    }
}

impl ProbabilityTensor {
    pub fn new(dims: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        let len = tensor_len(dims, bins)?;
        if values.len() != len {
            return Err(Error::structural(format!(
                "tensor with dims={dims}, bins={bins} needs {len} values, got {}",
                values.len()
            )));
        }
        let values = check_simplex(&values, "probability tensor")?;
        Ok(ProbabilityTensor { dims, bins, values })
    }

    /// Clip tiny negative noise and renormalize; used for factorization output.
    pub(crate) fn from_nonneg_unnormalized(dims: usize, bins: usize, mut values: Vec<f64>) -> Result<Self> {
        let len = tensor_len(dims, bins)?;
        if values.len() != len {
            return Err(Error::structural("value count does not match shape"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::structural("non-finite tensor entry"));
        }
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if sum <= 0.0 {
            return Err(Error::structural("tensor has no mass"));
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(ProbabilityTensor { dims, bins, values })
    }

    pub fn uniform(dims: usize, bins: usize) -> Result<Self> {
        let len = tensor_len(dims, bins)?;
        Ok(ProbabilityTensor { dims, bins, values: vec![1.0 / len as f64; len] })
    }

    pub fn point_mass(index: &MultiIndex, bins: usize) -> Result<Self> {
        let len = tensor_len(index.order(), bins)?;
        let mut values = vec![0.0; len];
        values[index.offset(bins)] = 1.0;
        Ok(ProbabilityTensor { dims: index.order(), bins, values })
    }

    /// Outer product of probability vectors of equal length.
    pub fn outer_product(vectors: &[Vec<f64>]) -> Result<Self> {
        let bins = vectors.first().map(Vec::len).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != bins) {
            return Err(Error::structural("outer product factors differ in length"));
        }
        tensor_len(vectors.len(), bins)?;
        let checked = vectors
            .iter()
            .map(|v| check_simplex(v, "outer product factor"))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = checked.iter().map(Vec::as_slice).collect();
        Self::from_nonneg_unnormalized(vectors.len(), bins, outer(&refs, 1.0))
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: &MultiIndex) -> f64 {
        self.values[index.offset(self.bins)]
    }

    pub fn same_shape(&self, other: &ProbabilityTensor) -> bool {
        self.dims == other.dims && self.bins == other.bins
    }

    /// Sum of squared entries.
    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn to_dense(&self) -> Dense {
        Dense::new(vec![self.bins; self.dims], self.values.clone())
    }
}

fn check_same_shape(s: &ProbabilityTensor, t: &ProbabilityTensor) -> Result<()> {
    if s.same_shape(t) {
        Ok(())
    } else {
        Err(Error::structural(format!(
            "shape mismatch: (d={}, b={}) vs (d={}, b={})",
            s.dims, s.bins, t.dims, t.bins
        )))
    }
}

/// `Σ_A |s[A] − t[A]|`.
pub fn l1_distance(s: &ProbabilityTensor, t: &ProbabilityTensor) -> Result<f64> {
    check_same_shape(s, t)?;
    Ok(s.values.iter().zip(&t.values).map(|(a, b)| (a - b).abs()).sum())
}

/// Euclidean distance between the entry vectors.
pub fn l2_distance(s: &ProbabilityTensor, t: &ProbabilityTensor) -> Result<f64> {
    check_same_shape(s, t)?;
    Ok(s.values
        .iter()
        .zip(&t.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

fn check_marginals(marginals: &[Vec<Vec<f64>>], dims: usize, k: usize, bins: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if marginals.len() != dims {
        return Err(Error::structural(format!(
            "expected marginals for {dims} modes, got {}",
            marginals.len()
        )));
    }
    marginals
        .iter()
        .enumerate()
        .map(|(j, per_mode)| {
            if per_mode.len() != k {
                return Err(Error::structural(format!(
                    "mode {j}: expected {k} marginals, got {}",
                    per_mode.len()
                )));
            }
            per_mode
                .iter()
                .map(|p| {
                    if p.len() != bins {
                        Err(Error::structural(format!(
                            "mode {j}: marginal has length {}, expected {bins}",
                            p.len()
                        )))
                    } else {
                        check_simplex(p, "marginal")
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Deserialize)]
struct RawMultiView {
    dims: usize,
    bins: usize,
    k: usize,
    weights: Vec<f64>,
    marginals: Vec<Vec<Vec<f64>>>,
}

/// Mixture weights plus one probability vector per (mode, component):
/// `T = Σ_i w_i ⊗_j marginals[j][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultiView")]
pub struct MultiViewFactors {
    dims: usize,
    bins: usize,
    k: usize,
    weights: Vec<f64>,
    marginals: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<RawMultiView> for MultiViewFactors {
    type Error = Error;
    fn try_from(r: RawMultiView) -> Result<Self> {
        let f = MultiViewFactors::new(r.weights, r.marginals)?;
        if f.dims != r.dims || f.bins != r.bins || f.k != r.k {
            return Err(Error::structural("declared dims/bins/k disagree with factor arrays"));
        }
        Ok(f)
    }
}

impl MultiViewFactors {
    pub fn new(weights: Vec<f64>, marginals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::structural("multi-view factors need k >= 1"));
        }
        let weights = check_simplex(&weights, "mixture weights")?;
        let dims = marginals.len();
        if dims == 0 {
            return Err(Error::structural("multi-view factors need at least one mode"));
        }
        let bins = marginals[0].first().map(Vec::len).unwrap_or(0);
        let marginals = check_marginals(&marginals, dims, k, bins)?;
        Ok(MultiViewFactors { dims, bins, k, weights, marginals })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// `marginals()[mode][component]`.
    pub fn marginals(&self) -> &[Vec<Vec<f64>>] {
        &self.marginals
    }
}

#[derive(Deserialize)]
struct RawTucker {
    dims: usize,
    bins: usize,
    k: usize,
    core: ProbabilityTensor,
    marginals: Vec<Vec<Vec<f64>>>,
}

/// A probability core `W ∈ T_{d,k}` plus `k` probability vectors per mode:
/// `T = Σ_S W_S ⊗_j marginals[j][S_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTucker")]
pub struct TuckerFactors {
    dims: usize,
    bins: usize,
    k: usize,
    core: ProbabilityTensor,
    marginals: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<RawTucker> for TuckerFactors {
    type Error = Error;
    fn try_from(r: RawTucker) -> Result<Self> {
        let f = TuckerFactors::new(r.core, r.marginals)?;
        if f.dims != r.dims || f.bins != r.bins || f.k != r.k {
            return Err(Error::structural("declared dims/bins/k disagree with factor arrays"));
        }
        Ok(f)
    }
}

impl TuckerFactors {
    pub fn new(core: ProbabilityTensor, marginals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dims = core.dims();
        let k = core.bins();
        let bins = marginals.first().and_then(|m| m.first()).map(Vec::len).unwrap_or(0);
        let marginals = check_marginals(&marginals, dims, k, bins)?;
        Ok(TuckerFactors { dims, bins, k, core, marginals })
    }

    /// Diagonal-core Tucker form of a multi-view model.
    pub fn from_multiview(f: &MultiViewFactors) -> Result<Self> {
        let k = f.k();
        let mut core = vec![0.0; tensor_len(f.dims(), k)?];
        let stride: usize = (0..f.dims()).fold(0, |acc, _| acc * k + 1);
        for (i, w) in f.weights().iter().enumerate() {
            core[i * stride] = *w;
        }
        TuckerFactors::new(ProbabilityTensor::new(f.dims(), k, core)?, f.marginals().to_vec())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn core(&self) -> &ProbabilityTensor {
        &self.core
    }
    /// `marginals()[mode][component]`.
    pub fn marginals(&self) -> &[Vec<Vec<f64>>] {
        &self.marginals
    }
}

/// `b × k` matrix whose column `s` is `marginals[s]`.
pub(crate) fn factor_matrix(per_mode: &[Vec<f64>], bins: usize) -> Mat {
    let k = per_mode.len();
    let mut m = Mat::zeros(bins, k);
    for (s, p) in per_mode.iter().enumerate() {
        for (i, v) in p.iter().enumerate() {
            *m.at_mut(i, s) = *v;
        }
    }
    m
}

fn check_bins(factor_bins: usize, b: usize) -> Result<()> {
    if factor_bins != b {
        return Err(Error::structural(format!(
            "marginals have length {factor_bins} but b = {b}"
        )));
    }
    Ok(())
}

/// `T[A] = Σ_i w_i Π_j p_{i,j}[A_j]`.
pub fn expand_multiview(f: &MultiViewFactors, b: usize) -> Result<ProbabilityTensor> {
    check_bins(f.bins, b)?;
    let len = tensor_len(f.dims, b)?;
    let mut values = vec![0.0; len];
    for (i, &w) in f.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let vecs: Vec<&[f64]> = f.marginals.iter().map(|m| m[i].as_slice()).collect();
        for (v, o) in values.iter_mut().zip(outer(&vecs, w)) {
            *v += o;
        }
    }
    ProbabilityTensor::from_nonneg_unnormalized(f.dims, b, values)
}

/// `T[A] = Σ_{S ∈ [k]^d} W_S Π_j p_{j,S_j}[A_j]`.
pub fn expand_tucker(f: &TuckerFactors, b: usize) -> Result<ProbabilityTensor> {
    check_bins(f.bins, b)?;
    tensor_len(f.dims, b)?;
    let mats: Vec<Mat> = f.marginals.iter().map(|m| factor_matrix(m, b)).collect();
    let full = f.core.to_dense().multi_mode_product(&mats, None);
    ProbabilityTensor::from_nonneg_unnormalized(f.dims, b, full.data)
}
