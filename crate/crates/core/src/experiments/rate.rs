use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{fit_nntf_histogram, FitOptions, NntfModel};
use crate::histogram::{fit_standard_histogram, Dataset, DatasetMeta, HistogramDensity};
use crate::lipschitz::PiecewiseLinear;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateOptions {
    pub d: usize,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub seed: u64,
    pub n: usize,
    pub standard_bins: usize,
    pub standard_l1: f64,
    pub nntf_bins: usize,
    pub nntf_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub d: usize,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rows: Vec<RateRow>,
    /// Log-log slope per seed, in the order of `seeds`.
    pub standard_slopes: Vec<f64>,
    pub nntf_slopes: Vec<f64>,
    /// Seeds where the low-rank slope is strictly more negative.
    pub steeper: usize,
}

impl RateTable {
    pub fn to_text(&self) -> String {
        let mut out = format!("d = {}\n{:>20}  {:>8}  {:>14}  {:>14}\n", self.d, "seed", "", "standard slope", "rank-1 slope");
        for ((s, a), b) in self.seeds.iter().zip(&self.standard_slopes).zip(&self.nntf_slopes) {
            out.push_str(&format!("{s:>20}  {:>8}  {a:>14.4}  {b:>14.4}\n", ""));
        }
        out.push_str(&format!("rank-1 steeper in {}/{} seeds\n", self.steeper, self.seeds.len()));
        out
    }
}

/// Draw from `(2x) ⊗ U^{d-1}` on `[0,1)^d`.
fn sample_truth(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = rng.random();
        pts.push(u.sqrt().min(f64::from_bits(1f64.to_bits() - 1)));
        for _ in 1..d {
            pts.push(rng.random::<f64>());
        }
    }
    Dataset::new(d, pts, DatasetMeta { seed: Some(seed), transforms: vec![] })
}

/// Exact L1 distance between `h` and `(2x) ⊗ U^{d-1}`.
pub(crate) fn l1_to_truth(h: &HistogramDensity) -> f64 {
    let (d, b) = (h.dims(), h.bins());
    let truth = PiecewiseLinear::linear(2.0, 0.0).expect("valid line");
    let tail = b.pow(d as u32 - 1);
    let vol = h.bin_volume();
    let scale = 1.0 / tail as f64;
    h.weights()
        .iter()
        .enumerate()
        .map(|(off, w)| {
            let i = off / tail;
            let (lo, hi) = (i as f64 / b as f64, (i + 1) as f64 / b as f64);
            truth.abs_dev(lo, hi, w / vol) * scale
        })
        .sum()
}

fn slope(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// L1 error of the standard histogram with `b = round(n^{1/(d+1)})` against a
/// rank-1 fit with `b = round(n^{1/3})`, for the truth `(2x) ⊗ U^{d-1}`.
pub fn rate_experiment(opts: &RateOptions) -> Result<RateTable> {
    if opts.d < 2 {
        return Err(Error::precondition(format!("rate experiment needs d >= 2, got {}", opts.d)));
    }
    if opts.ns.len() < 2 || opts.ns.contains(&0) {
        return Err(Error::precondition("need at least two sample sizes, all positive"));
    }
    if opts.seeds.is_empty() {
        return Err(Error::precondition("need at least one seed"));
    }
    opts.fit.validate()?;
    let d = opts.d;
    let jobs: Vec<(u64, usize)> = opts.seeds.iter().flat_map(|&s| opts.ns.iter().map(move |&n| (s, n))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(seed, n)| {
            let data = sample_truth(d, n, derive_seed(seed, &[n as u64]))?;
            let nf = n as f64;
            let b_std = (nf.powf(1.0 / (d as f64 + 1.0)).round() as usize).max(1);
            let b_lr = (nf.cbrt().round() as usize).max(1);
            let std = fit_standard_histogram(&data, b_std)?;
            let fit = FitOptions { seed: derive_seed(seed, &[n as u64, 1]), ..opts.fit.clone() };
            let lr = fit_nntf_histogram(&data, b_lr, 1, NntfModel::Multiview, &fit)?;
            Ok(RateRow {
                seed,
                n,
                standard_bins: b_std,
                standard_l1: l1_to_truth(&std),
                nntf_bins: b_lr,
                nntf_l1: l1_to_truth(&lr.density),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_seed = |pick: fn(&RateRow) -> f64| -> Vec<f64> {
        rows.chunks(opts.ns.len())
            .map(|c| slope(&opts.ns, &c.iter().map(pick).collect::<Vec<_>>()))
            .collect()
    };
    let standard_slopes = per_seed(|r| r.standard_l1);
    let nntf_slopes = per_seed(|r| r.nntf_l1);
    let steeper = standard_slopes.iter().zip(&nntf_slopes).filter(|(s, l)| l < s).count();
    Ok(RateTable {
        d,
        ns: opts.ns.clone(),
        seeds: opts.seeds.clone(),
        rows,
        standard_slopes,
        nntf_slopes,
        steeper,
    })
}
