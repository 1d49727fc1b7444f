#![allow(dead_code)]

use lowrank_hist::tensor::{MultiViewFactors, ProbabilityTensor, TuckerFactors};
use proptest::prelude::*;

/// Nonnegative vector with unit sum, built from positive raw draws.
pub fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

pub fn tensor(d: usize, b: usize) -> impl Strategy<Value = ProbabilityTensor> {
    simplex(b.pow(d as u32)).prop_map(move |v| ProbabilityTensor::new(d, b, v).unwrap())
}

/// `(d, b)` pairs of modest size.
pub fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=5)
}

pub fn multiview(d: usize, b: usize, k: usize) -> impl Strategy<Value = MultiViewFactors> {
    (simplex(k), prop::collection::vec(prop::collection::vec(simplex(b), k), d))
        .prop_map(|(w, m)| MultiViewFactors::new(w, m).unwrap())
}

pub fn tucker(d: usize, b: usize, k: usize) -> impl Strategy<Value = TuckerFactors> {
    (tensor(d, k), prop::collection::vec(prop::collection::vec(simplex(b), k), d))
        .prop_map(|(c, m)| TuckerFactors::new(c, m).unwrap())
}

/// Points strictly inside the unit cube, as a flat row-major vector.
pub fn points(d: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n).prop_map(|rows| rows.concat())
}
