//! Minimum-distance selection among histogram candidates with Scheffé sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covers::{cover_multiview, cover_tucker, Cover};
use crate::error::{Error, Result};
use crate::factorization::NntfModel;
use crate::histogram::{bin_counts, tensor_to_histogram, Dataset, HistogramDensity};

/// Samples needed for the selection guarantee with `m` candidates:
/// `⌈log(3m²/δ) / (2ε²)⌉`.
pub fn scheffe_sample_size(m: usize, eps: f64, delta: f64) -> Result<u64> {
    if m == 0 {
        return Err(Error::precondition("need at least one candidate"));
    }
    if !(eps > 0.0) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::precondition(format!("need eps > 0 and delta in (0, 1], got {eps}, {delta}")));
    }
    let mf = m as f64;
    Ok(((3.0 * mf * mf / delta).ln() / (2.0 * eps * eps)).ceil() as u64)
}

/// `Δ_i = max_j |P_i(A_ij) − μ_n(A_ij)|` for every candidate, where `A_ij` is
/// the union of bins on which candidate `i` is strictly larger than `j`.
pub fn scheffe_scores(candidates: &[HistogramDensity], data: &Dataset) -> Result<Vec<f64>> {
    let first = candidates.first().ok_or_else(|| Error::precondition("no candidates"))?;
    if data.is_empty() {
        return Err(Error::precondition("empty dataset"));
    }
    let (d, b) = (first.dims(), first.bins());
    if candidates.iter().any(|c| c.dims() != d || c.bins() != b) {
        return Err(Error::structural("candidates live on different grids"));
    }
    if data.dims() != d {
        return Err(Error::structural(format!("data has {} columns, candidates have d={d}", data.dims())));
    }
    let n = data.len() as f64;
    let freq: Vec<f64> = bin_counts(data, b)?.into_iter().map(|c| c as f64 / n).collect();
    Ok(candidates
        .par_iter()
        .enumerate()
        .map(|(i, ci)| {
            let pi = ci.weights();
            candidates
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, cj)| {
                    let (mut p, mut mu) = (0.0, 0.0);
                    for ((a, bw), f) in pi.iter().zip(cj.weights()).zip(&freq) {
                        if a > bw {
                            p += a;
                            mu += f;
                        }
                    }
                    (p - mu).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Index of the candidate with the smallest Scheffé score, lowest index on ties.
pub fn scheffe_select(candidates: &[HistogramDensity], data: &Dataset) -> Result<usize> {
    let scores = scheffe_scores(candidates, data)?;
    Ok(scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSelection {
    pub density: HistogramDensity,
    pub index: usize,
    pub cardinality: u128,
    pub cover: Cover,
}

/// Build the `ε`-cover of the chosen class and select from it with `data`.
pub fn select_from_cover(
    data: &Dataset,
    d: usize,
    b: usize,
    k: usize,
    eps: f64,
    model: NntfModel,
    cap: u128,
) -> Result<CoverSelection> {
    if data.dims() != d {
        return Err(Error::structural(format!("data has {} columns, expected d={d}", data.dims())));
    }
    let cover = match model {
        NntfModel::Multiview => cover_multiview(d, b, k, eps)?,
        NntfModel::Tucker => cover_tucker(d, b, k, eps)?,
    };
    let candidates: Vec<HistogramDensity> = cover.members(cap)?.into_iter().map(tensor_to_histogram).collect();
    let index = scheffe_select(&candidates, data)?;
    Ok(CoverSelection {
        density: candidates[index].clone(),
        index,
        cardinality: cover.cardinality(),
        cover,
    })
}
