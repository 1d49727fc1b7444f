//! Nonnegative Tucker and PARAFAC fits of probability tensors under squared
//! L2 error, and the NNTF histogram estimator built on them.
//!
//! Factor matrices are updated column by column with HALS (exact block
//! minimization under a `1e-12` floor); the Tucker core takes projected
//! gradient steps of length one over the Lipschitz constant. Both are
//! monotone, so the per-sweep objective never increases.
//! Simplex constraints are imposed after the fit: columns are rescaled to
//! unit sum with the scale pushed into the core (or weights), which is then
//! projected onto the simplex.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{jacobi_eigen, Dense, Mat};
use crate::error::{Error, Result};
use crate::histogram::{fit_standard_histogram, histogram_to_tensor, tensor_to_histogram, Dataset, HistogramDensity};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::tensor::{
    expand_multiview, expand_tucker, MultiViewFactors, ProbabilityTensor, TuckerFactors,
};

const FLOOR: f64 = 1e-12;
const CORE_INNER_ITERS: usize = 3;
/// Allowed per-sweep objective increase from rounding.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iters: 500, rel_tol: 1e-8, restarts: 1, seed: 0 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::structural("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::structural("rel_tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::structural("restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `‖target − expansion‖₂²` after the simplex projection.
    pub final_objective: f64,
    pub iterations: usize,
    /// Objective after each sweep, starting with the initial value.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub best_restart: usize,
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::structural("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::structural("cannot project a vector with non-finite entries"));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(w)
}

fn sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_target(target: &ProbabilityTensor, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::structural("rank k must be at least 1"));
    }
    if target.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::structural("target has non-finite entries"));
    }
    Ok(())
}

/// One exact HALS pass over the columns of `a`, minimizing
/// `‖X − a·Bᵀ‖²` given `p = X·B` and `q = BᵀB`.
fn hals_update(a: &mut Mat, p: &Mat, q: &Mat) {
    let (rows, k) = (a.rows, a.cols);
    for s in 0..k {
        let qss = q.at(s, s);
        if qss <= 0.0 {
            continue;
        }
        for i in 0..rows {
            let aq: f64 = (0..k).map(|t| a.at(i, t) * q.at(t, s)).sum();
            let v = a.at(i, s) + (p.at(i, s) - aq) / qss;
            *a.at_mut(i, s) = v.max(FLOOR);
        }
    }
}

fn col_sums(a: &Mat) -> Vec<f64> {
    let mut c = vec![0.0; a.cols];
    for r in 0..a.rows {
        for (s, cs) in c.iter_mut().enumerate() {
            *cs += a.at(r, s);
        }
    }
    c
}

fn random_stochastic(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for v in m.data.iter_mut() {
        *v = rng.random::<f64>() + 0.01;
    }
    let c = col_sums(&m);
    for r in 0..rows {
        for s in 0..cols {
            *m.at_mut(r, s) /= c[s];
        }
    }
    m
}

fn descend<S, F, O>(target: &Dense, state: &mut S, opts: &FitOptions, mut sweep: F, objective: O) -> (Vec<f64>, bool)
where
    F: FnMut(&Dense, &mut S),
    O: Fn(&Dense, &S) -> f64,
{
    let mut prev = objective(target, state);
    let mut trace = vec![prev];
    let mut converged = false;
    for _ in 0..opts.max_iters {
        sweep(target, state);
        let f = objective(target, state);
        debug_assert!(
            f <= prev + MONOTONE_SLACK,
            "objective increased from {prev} to {f} in one sweep"
        );
        trace.push(f);
        if (prev - f).abs() <= opts.rel_tol * prev || f <= 1e-28 {
            converged = true;
            break;
        }
        prev = f;
    }
    (trace, converged)
}

fn best_of<T: Send>(opts: &FitOptions, run: impl Fn(u64) -> Result<(T, FitReport)> + Sync) -> Result<(T, FitReport)> {
    let runs: Vec<Result<(T, FitReport)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| run(derive_seed(opts.seed, &[r as u64])))
        .collect();
    let mut best: Option<(T, FitReport)> = None;
    for (r, res) in runs.into_iter().enumerate() {
        let (f, mut rep) = res?;
        rep.best_restart = r;
        if best.as_ref().is_none_or(|(_, b)| rep.final_objective < b.final_objective) {
            best = Some((f, rep));
        }
    }
    Ok(best.expect("at least one restart"))
}

struct TuckerState {
    mats: Vec<Mat>,
    core: Dense,
}

fn tucker_objective(target: &Dense, st: &TuckerState) -> f64 {
    sq_diff(&target.data, &st.core.multi_mode_product(&st.mats, None).data)
}

fn tucker_sweep(target: &Dense, st: &mut TuckerState) {
    let d = st.mats.len();
    for n in 0..d {
        let at: Vec<Mat> = st.mats.iter().map(Mat::transpose).collect();
        let grams: Vec<Mat> = st.mats.iter().map(Mat::gram).collect();
        let p = target.multi_mode_product(&at, Some(n)).contract_except(&st.core, n);
        let q = st.core.multi_mode_product(&grams, Some(n)).contract_except(&st.core, n);
        hals_update(&mut st.mats[n], &p, &q);
    }
    let at: Vec<Mat> = st.mats.iter().map(Mat::transpose).collect();
    let grams: Vec<Mat> = st.mats.iter().map(Mat::gram).collect();
    let num = target.multi_mode_product(&at, None);
    // The core gradient is Lipschitz with constant Π_n λ_max(A_nᵀA_n).
    let lip: f64 = grams.iter().map(|g| jacobi_eigen(&g.rows_vec()).0[0].max(0.0)).product::<f64>() * (1.0 + 1e-9);
    if lip <= 0.0 {
        return tucker_rebalance(st);
    }
    for _ in 0..CORE_INNER_ITERS {
        let hg = st.core.multi_mode_product(&grams, None);
        for ((g, nu), h) in st.core.data.iter_mut().zip(&num.data).zip(&hg.data) {
            *g = (*g - (h - nu) / lip).max(0.0);
        }
    }
    tucker_rebalance(st);
}

/// Unit-sum columns, with the scale moved into the core.
fn tucker_rebalance(st: &mut TuckerState) {
    for (n, a) in st.mats.iter_mut().enumerate() {
        let c = col_sums(a);
        for r in 0..a.rows {
            for (s, cs) in c.iter().enumerate() {
                *a.at_mut(r, s) /= cs;
            }
        }
        let mut diag = Mat::zeros(c.len(), c.len());
        for (s, cs) in c.iter().enumerate() {
            *diag.at_mut(s, s) = *cs;
        }
        st.core = st.core.mode_product(n, &diag);
    }
}

fn tucker_once(target: &ProbabilityTensor, k: usize, opts: &FitOptions, seed: u64) -> Result<(TuckerFactors, FitReport)> {
    let (d, b) = (target.dims(), target.bins());
    let dense = target.to_dense();
    let mut rng = rng_from_seed(seed);
    let mats: Vec<Mat> = (0..d).map(|_| random_stochastic(b, k, &mut rng)).collect();
    let mut core: Vec<f64> = (0..k.pow(d as u32)).map(|_| rng.random::<f64>() + 0.01).collect();
    let cs: f64 = core.iter().sum();
    core.iter_mut().for_each(|g| *g /= cs);
    let mut st = TuckerState { mats, core: Dense::new(vec![k; d], core) };

    let (trace, converged) = descend(&dense, &mut st, opts, tucker_sweep, tucker_objective);
    tucker_rebalance(&mut st);

    let core = ProbabilityTensor::new(d, k, project_to_simplex(&st.core.data)?)?;
    let marginals = st.mats.iter().map(|m| (0..k).map(|s| m.column(s)).collect()).collect();
    let factors = TuckerFactors::new(core, marginals)?;
    let final_objective = sq_diff(target.values(), expand_tucker(&factors, b)?.values());
    let report = FitReport { final_objective, iterations: trace.len() - 1, trace, converged, best_restart: 0 };
    Ok((factors, report))
}

/// With `k = b` the identity marginals and the target itself as core
/// reproduce the target exactly.
fn tucker_identity(target: &ProbabilityTensor) -> Result<(TuckerFactors, FitReport)> {
    let b = target.bins();
    let eye: Vec<Vec<f64>> = (0..b).map(|s| (0..b).map(|i| if i == s { 1.0 } else { 0.0 }).collect()).collect();
    let factors = TuckerFactors::new(target.clone(), vec![eye; target.dims()])?;
    let final_objective = sq_diff(target.values(), expand_tucker(&factors, b)?.values());
    let report = FitReport { final_objective, iterations: 0, trace: vec![final_objective], converged: true, best_restart: 0 };
    Ok((factors, report))
}

/// Nonnegative Tucker fit with rank `[k, …, k]`, best of `opts.restarts`.
pub fn nonneg_tucker_fit(target: &ProbabilityTensor, k: usize, opts: &FitOptions) -> Result<(TuckerFactors, FitReport)> {
    check_target(target, k)?;
    opts.validate()?;
    if k > target.bins() {
        return Err(Error::precondition(format!(
            "Tucker rank k={k} exceeds the number of bins b={}",
            target.bins()
        )));
    }
    if k == target.bins() {
        return tucker_identity(target);
    }
    best_of(opts, |seed| tucker_once(target, k, opts, seed))
}

struct CpState {
    mats: Vec<Mat>,
}

fn cp_expand(st: &CpState) -> Vec<f64> {
    let k = st.mats[0].cols;
    let cols: Vec<Vec<Vec<f64>>> = st.mats.iter().map(|m| (0..k).map(|s| m.column(s)).collect()).collect();
    let mut out: Vec<f64> = Vec::new();
    for s in 0..k {
        let vecs: Vec<&[f64]> = cols.iter().map(|c| c[s].as_slice()).collect();
        let o = crate::dense::outer(&vecs, 1.0);
        if out.is_empty() {
            out = o;
        } else {
            out.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }
    out
}

fn cp_objective(target: &Dense, st: &CpState) -> f64 {
    sq_diff(&target.data, &cp_expand(st))
}

fn cp_sweep(target: &Dense, st: &mut CpState) {
    let d = st.mats.len();
    let k = st.mats[0].cols;
    for n in 0..d {
        let b = st.mats[n].rows;
        let cols: Vec<Vec<Vec<f64>>> = st.mats.iter().map(|m| (0..k).map(|s| m.column(s)).collect()).collect();
        let mut p = Mat::zeros(b, k);
        for s in 0..k {
            let vecs: Vec<&[f64]> = cols.iter().map(|c| c[s].as_slice()).collect();
            for (i, v) in target.vectors_except(&vecs, n).into_iter().enumerate() {
                *p.at_mut(i, s) = v;
            }
        }
        let mut q = Mat { rows: k, cols: k, data: vec![1.0; k * k] };
        for (m, a) in st.mats.iter().enumerate() {
            if m != n {
                q.data.iter_mut().zip(a.gram().data).for_each(|(x, g)| *x *= g);
            }
        }
        hals_update(&mut st.mats[n], &p, &q);
    }
    cp_rebalance(st);
}

/// Spread each component's scale evenly over the modes.
fn cp_rebalance(st: &mut CpState) {
    let d = st.mats.len() as f64;
    let sums: Vec<Vec<f64>> = st.mats.iter().map(col_sums).collect();
    let k = st.mats[0].cols;
    for s in 0..k {
        let log_scale: f64 = sums.iter().map(|c| c[s].ln()).sum::<f64>() / d;
        let g = log_scale.exp();
        for (a, c) in st.mats.iter_mut().zip(&sums) {
            let f = g / c[s];
            for r in 0..a.rows {
                *a.at_mut(r, s) *= f;
            }
        }
    }
}

fn parafac_once(target: &ProbabilityTensor, k: usize, opts: &FitOptions, seed: u64) -> Result<(MultiViewFactors, FitReport)> {
    let (d, b) = (target.dims(), target.bins());
    let dense = target.to_dense();
    let mut rng = rng_from_seed(seed);
    let mut mats: Vec<Mat> = (0..d).map(|_| random_stochastic(b, k, &mut rng)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
    let ws: f64 = w.iter().sum();
    for r in 0..b {
        for (s, ws_) in w.iter().enumerate() {
            *mats[0].at_mut(r, s) *= ws_ / ws;
        }
    }
    let mut st = CpState { mats };
    cp_rebalance(&mut st);

    let (trace, converged) = descend(&dense, &mut st, opts, cp_sweep, cp_objective);

    let mut lambda = vec![1.0; k];
    let mut marginals = Vec::with_capacity(d);
    for a in &st.mats {
        let c = col_sums(a);
        lambda.iter_mut().zip(&c).for_each(|(l, cs)| *l *= cs);
        marginals.push((0..k).map(|s| a.column(s).iter().map(|v| v / c[s]).collect()).collect());
    }
    let factors = MultiViewFactors::new(project_to_simplex(&lambda)?, marginals)?;
    let final_objective = sq_diff(target.values(), expand_multiview(&factors, b)?.values());
    let report = FitReport { final_objective, iterations: trace.len() - 1, trace, converged, best_restart: 0 };
    Ok((factors, report))
}

/// Nonnegative PARAFAC fit with `k` components, best of `opts.restarts`.
pub fn nonneg_parafac_fit(target: &ProbabilityTensor, k: usize, opts: &FitOptions) -> Result<(MultiViewFactors, FitReport)> {
    check_target(target, k)?;
    opts.validate()?;
    best_of(opts, |seed| parafac_once(target, k, opts, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NntfModel {
    Multiview,
    Tucker,
}

impl std::str::FromStr for NntfModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiview" => Ok(NntfModel::Multiview),
            "tucker" => Ok(NntfModel::Tucker),
            _ => Err(Error::structural(format!("unknown model '{s}', expected multiview or tucker"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Factors {
    Multiview(MultiViewFactors),
    Tucker(TuckerFactors),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NntfFit {
    pub density: HistogramDensity,
    pub factors: Factors,
    pub report: FitReport,
}

/// Standard histogram, factorized at rank `k` and expanded back.
pub fn fit_nntf_histogram(data: &Dataset, b: usize, k: usize, model: NntfModel, opts: &FitOptions) -> Result<NntfFit> {
    if k == 0 || k > b {
        return Err(Error::precondition(format!("need 1 <= k <= b, got k={k}, b={b}")));
    }
    let target = histogram_to_tensor(fit_standard_histogram(data, b)?);
    let (tensor, factors, report) = match model {
        NntfModel::Tucker => {
            let (f, r) = nonneg_tucker_fit(&target, k, opts)?;
            (expand_tucker(&f, b)?, Factors::Tucker(f), r)
        }
        NntfModel::Multiview => {
            let (f, r) = nonneg_parafac_fit(&target, k, opts)?;
            (expand_multiview(&f, b)?, Factors::Multiview(f), r)
        }
    };
    Ok(NntfFit { density: tensor_to_histogram(tensor), factors, report })
}
