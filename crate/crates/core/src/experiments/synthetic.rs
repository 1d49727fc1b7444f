use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Dataset, DatasetMeta};
use crate::lipschitz::{PiecewiseLinear, PiecewiseLinearDensity};
use crate::rng::rng_from_seed;

/// A one-dimensional marginal given by the knots of a continuous
/// piecewise-linear function; it is normalized to unit mass on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl MarginalSpec {
    pub fn density(&self) -> Result<PiecewiseLinearDensity> {
        if self.values.iter().any(|v| *v < 0.0) {
            return Err(Error::structural("marginal knot values must be nonnegative"));
        }
        PiecewiseLinearDensity::normalized(PiecewiseLinear::from_knots(&self.knots, &self.values)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub marginals: Vec<MarginalSpec>,
}

/// A multi-view mixture `Σ_i w_i Π_j f_{i,j}(x_j)` of piecewise-linear
/// marginals. A single component gives a separable density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dims: usize,
    pub components: Vec<MixtureComponent>,
}

struct Compiled {
    weights: Vec<f64>,
    marginals: Vec<Vec<PiecewiseLinearDensity>>,
}

impl SyntheticSpec {
    /// Random mixture of `k` components whose marginals interpolate
    /// `knots` equally spaced values drawn from `[0.05, 1]`.
    pub fn random_multiview(dims: usize, k: usize, knots: usize, seed: u64) -> Result<Self> {
        if dims == 0 || k == 0 || knots < 2 {
            return Err(Error::structural("need dims >= 1, k >= 1 and at least two knots"));
        }
        let mut rng = rng_from_seed(seed);
        let xs: Vec<f64> = (0..knots).map(|i| i as f64 / (knots - 1) as f64).collect();
        let raw_w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.5).collect();
        let total: f64 = raw_w.iter().sum();
        let components = raw_w
            .iter()
            .map(|w| MixtureComponent {
                weight: w / total,
                marginals: (0..dims)
                    .map(|_| MarginalSpec {
                        knots: xs.clone(),
                        values: (0..knots).map(|_| 0.05 + 0.95 * rng.random::<f64>()).collect(),
                    })
                    .collect(),
            })
            .collect();
        let spec = SyntheticSpec { dims, components };
        spec.compile()?;
        Ok(spec)
    }

    fn compile(&self) -> Result<Compiled> {
        if self.components.is_empty() {
            return Err(Error::structural("synthetic spec needs at least one component"));
        }
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        crate::tensor::check_simplex(&weights, "component weights")?;
        let marginals = self
            .components
            .iter()
            .map(|c| {
                if c.marginals.len() != self.dims {
                    return Err(Error::structural(format!(
                        "component has {} marginals, expected {}",
                        c.marginals.len(),
                        self.dims
                    )));
                }
                c.marginals.iter().map(MarginalSpec::density).collect()
            })
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(Compiled { weights, marginals })
    }

    /// Density value at `x`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let c = self.compile()?;
        Ok(c.weights
            .iter()
            .zip(&c.marginals)
            .map(|(w, ms)| w * ms.iter().zip(x).map(|(m, &xi)| m.eval(xi)).product::<f64>())
            .sum())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let c = self.compile()?;
        let mut rng = rng_from_seed(seed);
        let mut points = Vec::with_capacity(n * self.dims);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = c.weights.len() - 1;
            for (i, w) in c.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            for m in &c.marginals[comp] {
                points.push(m.sample(&mut rng));
            }
        }
        Dataset::new(
            self.dims,
            points,
            DatasetMeta { seed: Some(seed), transforms: vec!["synthetic multi-view mixture".into()] },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_spec_samples_in_cube() {
        let s = SyntheticSpec::random_multiview(3, 2, 4, 5).unwrap();
        let d = s.sample(500, 1).unwrap();
        assert_eq!(d.len(), 500);
        assert!(d.flat().iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(d, s.sample(500, 1).unwrap());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = SyntheticSpec::random_multiview(2, 2, 3, 1).unwrap();
        let back: SyntheticSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn bad_weights_rejected() {
        let mut s = SyntheticSpec::random_multiview(2, 2, 3, 1).unwrap();
        s.components[0].weight = 0.9;
        s.components[1].weight = 0.9;
        assert!(s.sample(10, 0).is_err());
    }
}
