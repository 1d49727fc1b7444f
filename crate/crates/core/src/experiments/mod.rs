//! The experiment pipeline: risk, dimensionality reduction, cross-validation,
//! significance testing, the trial harness and the convergence-rate study.

mod cv;
mod harness;
mod rate;
mod reduce;
mod risk;
mod synthetic;
mod wilcoxon;

pub use cv::{cross_validate, CvCell, CvOptions, CvResult, Estimator};
pub use harness::{
    default_grid, run_experiment, DataSource, ExperimentConfig, Reduction, ResultsTable, Summary,
    TrialResult,
};
pub use rate::{rate_experiment, RateOptions, RateRow, RateTable};
pub use reduce::{jacobi_eigen, pca_project, random_basis, random_project, scale_to_unit_cube};
pub use risk::empirical_l2_risk;
pub use synthetic::{MarginalSpec, MixtureComponent, SyntheticSpec};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
