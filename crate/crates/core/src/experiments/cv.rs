use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{fit_nntf_histogram, FitOptions, NntfModel};
use crate::histogram::{fit_standard_histogram, Dataset, HistogramDensity};
use crate::rng::{derive_seed, rng_from_seed};

use super::risk::empirical_l2_risk;

/// Which histogram estimator to tune.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Standard,
    Tucker,
    Multiview,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Estimator::Standard),
            "tucker" => Ok(Estimator::Tucker),
            "multiview" => Ok(Estimator::Multiview),
            _ => Err(Error::structural(format!(
                "unknown estimator '{s}', expected standard, tucker or multiview"
            ))),
        }
    }
}

impl Estimator {
    /// Fit on `data` with `b` bins and rank `k`; `k` is ignored by the
    /// standard histogram.
    pub fn fit(self, data: &Dataset, b: usize, k: usize, opts: &FitOptions) -> Result<HistogramDensity> {
        match self {
            Estimator::Standard => fit_standard_histogram(data, b),
            Estimator::Tucker => Ok(fit_nntf_histogram(data, b, k, NntfModel::Tucker, opts)?.density),
            Estimator::Multiview => Ok(fit_nntf_histogram(data, b, k, NntfModel::Multiview, opts)?.density),
        }
    }

    /// Grid cells `(b, k)` searched for this estimator. Cells with `k > b`
    /// are left out since the factorizations require `k <= b`.
    pub fn grid(self, b_max: usize, k_max: usize) -> Vec<(usize, usize)> {
        match self {
            Estimator::Standard => (1..=b_max).map(|b| (b, 1)).collect(),
            _ => (1..=b_max).flat_map(|b| (1..=k_max.min(b)).map(move |k| (b, k))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvOptions {
    pub folds: usize,
    pub fold_train: usize,
    pub fold_eval: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { folds: 80, fold_train: 160, fold_eval: 40, seed: 0, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub b: usize,
    pub k: usize,
    pub mean_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub estimator: Estimator,
    pub best_b: usize,
    pub best_k: usize,
    pub best_risk: f64,
    pub cells: Vec<CvCell>,
}

/// Random-subset cross-validation over `[1, b_max] × [1, k_max]`.
///
/// Every fold draws `fold_train + fold_eval` distinct points; all grid cells
/// share the same folds. The cell with the lowest mean held-out risk wins,
/// ties going to the lexicographically smallest `(b, k)`.
pub fn cross_validate(data: &Dataset, b_max: usize, k_max: usize, estimator: Estimator, opts: &CvOptions) -> Result<CvResult> {
    if b_max == 0 || k_max == 0 {
        return Err(Error::precondition("grid must contain at least one cell"));
    }
    if opts.folds == 0 || opts.fold_train == 0 || opts.fold_eval == 0 {
        return Err(Error::precondition("folds and fold sizes must be at least 1"));
    }
    let need = opts.fold_train + opts.fold_eval;
    if data.len() < need {
        return Err(Error::precondition(format!(
            "cross-validation needs {need} points per fold, dataset has {}",
            data.len()
        )));
    }
    opts.fit.validate()?;
    let folds: Vec<(Dataset, Dataset)> = (0..opts.folds)
        .map(|f| {
            let mut rng = rng_from_seed(derive_seed(opts.seed, &[f as u64]));
            let idx = sample(&mut rng, data.len(), need).into_vec();
            (data.subset(&idx[..opts.fold_train]), data.subset(&idx[opts.fold_train..]))
        })
        .collect();
    let grid = estimator.grid(b_max, k_max);
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..folds.len()).map(move |f| (c, f))).collect();
    let risks: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (b, k) = grid[c];
            let fit_opts = FitOptions {
                seed: derive_seed(opts.fit.seed, &[f as u64, b as u64, k as u64]),
                ..opts.fit.clone()
            };
            let h = estimator.fit(&folds[f].0, b, k, &fit_opts)?;
            empirical_l2_risk(&h, &folds[f].1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let cells: Vec<CvCell> = grid
        .iter()
        .enumerate()
        .map(|(c, &(b, k))| CvCell {
            b,
            k,
            mean_risk: risks[c * folds.len()..(c + 1) * folds.len()].iter().sum::<f64>() / folds.len() as f64,
        })
        .collect();
    let best = cells
        .iter()
        .fold(&cells[0], |best, c| if c.mean_risk < best.mean_risk { c } else { best });
    Ok(CvResult { estimator, best_b: best.b, best_k: best.k, best_risk: best.mean_risk, cells: cells.clone() })
}
