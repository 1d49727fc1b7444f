use rand_distr::{Distribution, StandardNormal};

pub use crate::dense::jacobi_eigen;
use crate::error::{Error, Result};
use crate::histogram::{Dataset, DatasetMeta};
use crate::rng::rng_from_seed;

fn check_matrix(raw: &[Vec<f64>]) -> Result<usize> {
    let cols = raw.first().map(Vec::len).unwrap_or(0);
    if cols == 0 {
        return Err(Error::structural("matrix has no columns"));
    }
    if raw.iter().any(|r| r.len() != cols) {
        return Err(Error::structural("matrix rows differ in length"));
    }
    if raw.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::structural("matrix has non-finite entries"));
    }
    Ok(cols)
}

/// Center the rows and project onto the top `d` principal axes of the sample
/// covariance. No whitening.
pub fn pca_project(raw: &[Vec<f64>], d: usize) -> Result<Vec<Vec<f64>>> {
    let cols = check_matrix(raw)?;
    if d == 0 || d > cols {
        return Err(Error::precondition(format!("need 1 <= d <= {cols}, got d={d}")));
    }
    if raw.len() < 2 {
        return Err(Error::precondition("PCA needs at least two rows"));
    }
    let n = raw.len() as f64;
    let mean: Vec<f64> = (0..cols).map(|j| raw.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![vec![0.0; cols]; cols];
    for r in &centered {
        for i in 0..cols {
            for j in i..cols {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..cols {
        for j in i..cols {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let (_, vecs) = jacobi_eigen(&cov);
    Ok(centered
        .iter()
        .map(|r| (0..d).map(|c| (0..cols).map(|i| r[i] * vecs[i][c]).sum()).collect())
        .collect())
}

/// A seeded `D×D` orthonormal basis (columns), from Gram–Schmidt on Gaussian
/// draws.
pub fn random_basis(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        // two passes keep the basis orthogonal to rounding precision
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (0..dim).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Project onto the first `d` vectors of a seeded orthonormal basis. The
/// basis depends only on the seed and `D`, so the output for `d − 1` is the
/// first `d − 1` columns of the output for `d`.
pub fn random_project(raw: &[Vec<f64>], d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cols = check_matrix(raw)?;
    if d == 0 || d > cols {
        return Err(Error::precondition(format!("need 1 <= d <= {cols}, got d={d}")));
    }
    let basis = random_basis(cols, seed);
    Ok(raw
        .iter()
        .map(|r| (0..d).map(|c| (0..cols).map(|i| r[i] * basis[i][c]).sum()).collect())
        .collect())
}

/// Affinely map each column's `[min, max]` onto `[0, 1)`. Values that land
/// on 1 become the largest double below 1; constant columns become 0.5.
pub fn scale_to_unit_cube(m: &[Vec<f64>]) -> Result<Dataset> {
    let cols = check_matrix(m)?;
    let mut points = Vec::with_capacity(m.len() * cols);
    let lo: Vec<f64> = (0..cols).map(|j| m.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..cols).map(|j| m.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    for r in m {
        for j in 0..cols {
            let x = if hi[j] > lo[j] { (r[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.5 };
            points.push(if x >= 1.0 { f64::next_down(1.0) } else { x.max(0.0) });
        }
    }
    Dataset::new(cols, points, DatasetMeta { seed: None, transforms: vec!["scale_to_unit_cube".into()] })
}
