//! Binning, the standard histogram estimator and histogram densities.

use std::path::Path;

use rand::Rng as _;
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::{tensor_len, MultiIndex, ProbabilityTensor};

/// Provenance of a dataset: the seed that generated it (if any) and the
/// transforms applied, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub transforms: Vec<String>,
}

/// `n` points in the unit cube, stored row-major.
///
/// Coordinates must lie in `[0, 1]`. A coordinate equal to `1.0` is kept and
/// binned into the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dims: usize,
    points: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(dims: usize, points: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if dims == 0 {
            return Err(Error::structural("dataset needs at least one dimension"));
        }
        if points.len() % dims != 0 {
            return Err(Error::structural(format!(
                "{} coordinates do not split into rows of {dims}",
                points.len()
            )));
        }
        if let Some((i, x)) = points.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::domain(format!(
                "coordinate {x} (row {}, column {}) outside the unit cube",
                i / dims,
                i % dims
            )));
        }
        Ok(Dataset { dims, points, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>], meta: DatasetMeta) -> Result<Self> {
        let dims = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::structural("rows have differing lengths"));
        }
        Dataset::new(dims.max(1), rows.concat(), meta)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dims..(i + 1) * self.dims]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dims)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut points = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Dataset { dims: self.dims, points, meta: self.meta.clone() }
    }

    /// Read a CSV with one point per row.
    pub fn read_csv(path: &Path, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let rows = read_matrix(file, has_header)?;
        let mut ds = Dataset::from_rows(&rows, DatasetMeta::default())?;
        ds.meta.transforms.push(format!("csv:{}", path.display()));
        Ok(ds)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in self.points() {
            w.write_record(p.iter().map(|x| format!("{x:.17e}")))?;
        }
        w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

/// Parse numeric CSV rows of equal length.
pub fn read_matrix<R: std::io::Read>(reader: R, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: '{f}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if first != row.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} columns, expected {first}",
                    line + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(rows)
}

#[inline]
fn bin_of(x: f64, b: usize) -> usize {
    ((b as f64 * x).floor() as usize).min(b - 1)
}

fn flat_bin(x: &[f64], b: usize) -> usize {
    x.iter().fold(0, |acc, &c| acc * b + bin_of(c, b))
}

/// The bin `A` with `(A_j - 1)/b <= x_j < A_j/b`; `x_j = 1` goes to bin `b`.
pub fn bin_index(x: &[f64], b: usize) -> Result<MultiIndex> {
    if b == 0 {
        return Err(Error::structural("b must be at least 1"));
    }
    if let Some(c) = x.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::domain(format!("coordinate {c} outside [0, 1)")));
    }
    MultiIndex::new(x.iter().map(|&c| bin_of(c, b) + 1).collect(), b)
}

/// A probability tensor read as a piecewise-constant density on `[0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistogramDensity {
    tensor: ProbabilityTensor,
}

pub fn tensor_to_histogram(t: ProbabilityTensor) -> HistogramDensity {
    HistogramDensity { tensor: t }
}

pub fn histogram_to_tensor(h: HistogramDensity) -> ProbabilityTensor {
    h.tensor
}

impl HistogramDensity {
    pub fn tensor(&self) -> &ProbabilityTensor {
        &self.tensor
    }

    pub fn dims(&self) -> usize {
        self.tensor.dims()
    }

    pub fn bins(&self) -> usize {
        self.tensor.bins()
    }

    pub fn weights(&self) -> &[f64] {
        self.tensor.values()
    }

    /// Volume of one bin, `b^{-d}`.
    pub fn bin_volume(&self) -> f64 {
        (self.bins() as f64).powi(-(self.dims() as i32))
    }

    /// Density value on bin `A`: `weight[A] * b^d`.
    pub fn value_on_bin(&self, offset: usize) -> f64 {
        self.weights()[offset] / self.bin_volume()
    }

    /// `∫ h^2 = b^d Σ w_A^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.tensor.sum_of_squares() / self.bin_volume()
    }

    /// Flat bin offset of a point, with the same checks as [`bin_index`].
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dims() {
            return Err(Error::structural(format!(
                "point has {} coordinates, density has {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(bin_index(x, self.bins())?.offset(self.bins()))
    }
}

/// `∫ g h` for two histograms on the same grid.
pub fn inner_product(g: &HistogramDensity, h: &HistogramDensity) -> Result<f64> {
    if !g.tensor.same_shape(&h.tensor) {
        return Err(Error::structural("histograms live on different grids"));
    }
    let s: f64 = g.weights().iter().zip(h.weights()).map(|(a, b)| a * b).sum();
    Ok(s / g.bin_volume())
}

/// Bin counts of `data` on the `b^d` grid.
pub fn bin_counts(data: &Dataset, b: usize) -> Result<Vec<u64>> {
    let len = tensor_len(data.dims(), b)?;
    let mut counts = vec![0u64; len];
    for p in data.points() {
        counts[flat_bin(p, b)] += 1;
    }
    Ok(counts)
}

/// The standard histogram: weight of bin `A` is the fraction of points in it.
pub fn fit_standard_histogram(data: &Dataset, b: usize) -> Result<HistogramDensity> {
    if data.is_empty() {
        return Err(Error::precondition("cannot fit a histogram to an empty dataset"));
    }
    if b == 0 {
        return Err(Error::structural("b must be at least 1"));
    }
    let n = data.len() as f64;
    let values = bin_counts(data, b)?.into_iter().map(|c| c as f64 / n).collect();
    Ok(tensor_to_histogram(ProbabilityTensor::new(data.dims(), b, values)?))
}

pub fn evaluate_density(h: &HistogramDensity, x: &[f64]) -> Result<f64> {
    Ok(h.value_on_bin(h.locate(x)?))
}

/// Draw `n` i.i.d. points: pick a bin by weight, then a uniform point in it.
pub fn sample_histogram(h: &HistogramDensity, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::precondition("sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let pick = WeightedIndex::new(h.weights()).map_err(|e| Error::structural(e.to_string()))?;
    let (d, b) = (h.dims(), h.bins());
    let bf = b as f64;
    let mut points = Vec::with_capacity(n * d);
    let mut idx = vec![0usize; d];
    for _ in 0..n {
        let mut off = pick.sample(&mut rng);
        for slot in idx.iter_mut().rev() {
            *slot = off % b;
            off /= b;
        }
        for &a in &idx {
            let u: f64 = rng.random();
            // (a + u)/b can round up to the next bin edge; keep it inside bin a
            let x = ((a as f64 + u) / bf).min(f64::next_down((a + 1) as f64 / bf));
            points.push(x.max(a as f64 / bf));
        }
    }
    Dataset::new(d, points, DatasetMeta { seed: Some(seed), transforms: vec![format!("sample_histogram(b={b})")] })
}
