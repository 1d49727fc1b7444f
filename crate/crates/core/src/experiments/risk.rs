use crate::error::{Error, Result};
use crate::histogram::{bin_counts, Dataset, HistogramDensity};

/// `‖h‖₂² − (2/n) Σ_i h(X_i)`, an estimate of `‖h − p‖₂² − ‖p‖₂²`.
pub fn empirical_l2_risk(h: &HistogramDensity, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::precondition("risk needs at least one evaluation point"));
    }
    if data.dims() != h.dims() {
        return Err(Error::structural(format!(
            "data has {} columns, histogram has d={}",
            data.dims(),
            h.dims()
        )));
    }
    let counts = bin_counts(data, h.bins())?;
    let hits: f64 = counts
        .iter()
        .zip(h.weights())
        .filter(|(c, _)| **c > 0)
        .map(|(&c, w)| c as f64 * w)
        .sum();
    let n = data.len() as f64;
    Ok(h.l2_norm_sq() - 2.0 * hits / (n * h.bin_volume()))
}
