use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::FitOptions;
use crate::histogram::{read_matrix, Dataset};
use crate::rng::{derive_seed, rng_from_seed};

use super::cv::{cross_validate, CvOptions, Estimator};
use super::reduce::{pca_project, random_project, scale_to_unit_cube};
use super::risk::empirical_l2_risk;
use super::synthetic::SyntheticSpec;
use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
use super::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
    Synthetic {
        spec: SyntheticSpec,
        n: usize,
        /// Sampling seed; derived from the master seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Pca,
    Random,
    /// Use the data as given; it must already lie in the unit cube.
    None,
}

impl Reduction {
    fn label(self) -> &'static str {
        match self {
            Reduction::Pca => "PCA",
            Reduction::Random => "Rand",
            Reduction::None => "None",
        }
    }
}

/// Grid limits used when a config leaves them out.
pub fn default_grid(d: usize) -> (usize, usize) {
    match d {
        0..=3 => (15, 10),
        4 => (12, 8),
        _ => (8, 6),
    }
}

fn default_trials() -> usize {
    32
}
fn default_folds() -> usize {
    80
}
fn default_train() -> usize {
    200
}
fn default_fold_train() -> usize {
    160
}
fn default_fold_eval() -> usize {
    40
}
fn default_model() -> Estimator {
    Estimator::Tucker
}
fn default_baseline() -> Estimator {
    Estimator::Standard
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub source: DataSource,
    pub reduction: Reduction,
    pub dims: usize,
    #[serde(default)]
    pub b_max: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_train")]
    pub train_size: usize,
    #[serde(default = "default_fold_train")]
    pub fold_train: usize,
    #[serde(default = "default_fold_eval")]
    pub fold_eval: usize,
    pub seed: u64,
    #[serde(default = "default_model")]
    pub model: Estimator,
    #[serde(default = "default_baseline")]
    pub baseline: Estimator,
    #[serde(default)]
    pub fit: FitOptions,
}

impl ExperimentConfig {
    pub fn grid(&self) -> (usize, usize) {
        let (b, k) = default_grid(self.dims);
        (self.b_max.unwrap_or(b), self.k_max.unwrap_or(k))
    }

    pub fn validate(&self) -> Result<()> {
        let (b_max, k_max) = self.grid();
        for (name, v) in [
            ("dims", self.dims),
            ("b_max", b_max),
            ("k_max", k_max),
            ("trials", self.trials),
            ("folds", self.folds),
            ("fold_train", self.fold_train),
            ("fold_eval", self.fold_eval),
        ] {
            if v == 0 {
                return Err(Error::structural(format!("{name} must be at least 1")));
            }
        }
        if self.fold_train + self.fold_eval != self.train_size {
            return Err(Error::structural(format!(
                "fold_train + fold_eval = {} must equal train_size = {}",
                self.fold_train + self.fold_eval,
                self.train_size
            )));
        }
        self.fit.validate()
    }

    fn label(&self) -> String {
        match (&self.name, &self.source) {
            (Some(n), _) => n.clone(),
            (None, DataSource::Csv { path, .. }) => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into())
            }
            (None, DataSource::Synthetic { .. }) => "Synthetic".into(),
        }
    }

    /// Load, reduce and scale the data as configured.
    pub fn load(&self) -> Result<Dataset> {
        let raw = match &self.source {
            DataSource::Csv { path, header } => {
                let file = std::fs::File::open(path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                read_matrix(file, *header)?
            }
            DataSource::Synthetic { spec, n, seed } => {
                let seed = seed.unwrap_or_else(|| derive_seed(self.seed, &[u64::MAX]));
                let ds = spec.sample(*n, seed)?;
                if self.reduction == Reduction::None {
                    if ds.dims() != self.dims {
                        return Err(Error::structural(format!(
                            "synthetic data has {} dims but config asks for {}",
                            ds.dims(),
                            self.dims
                        )));
                    }
                    return Ok(ds);
                }
                ds.points().map(<[f64]>::to_vec).collect()
            }
        };
        let reduced = match self.reduction {
            Reduction::Pca => pca_project(&raw, self.dims)?,
            Reduction::Random => random_project(&raw, self.dims, derive_seed(self.seed, &[u64::MAX - 1]))?,
            Reduction::None => {
                let ds = Dataset::from_rows(&raw, Default::default())?;
                if ds.dims() != self.dims {
                    return Err(Error::structural(format!(
                        "data has {} columns but config asks for {}",
                        ds.dims(),
                        self.dims
                    )));
                }
                return Ok(ds);
            }
        };
        let mut ds = scale_to_unit_cube(&reduced)?;
        ds.meta.transforms.insert(0, format!("{}(d={})", self.reduction.label(), self.dims));
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub hist_perf: f64,
    pub nntf_perf: f64,
    pub hist_bins: usize,
    pub nntf_bins: usize,
    pub nntf_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        let (mean, std) = mean_std(xs);
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub hist_perf: MeanStd,
    pub nntf_perf: MeanStd,
    pub hist_bins: MeanStd,
    pub nntf_bins: MeanStd,
    pub nntf_k: MeanStd,
    pub p_value: f64,
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub dataset: String,
    pub reduction: Reduction,
    pub dims: usize,
    pub baseline: Estimator,
    pub model: Estimator,
    pub b_max: usize,
    pub k_max: usize,
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

impl ResultsTable {
    fn from_trials(cfg: &ExperimentConfig, trials: Vec<TrialResult>) -> Self {
        let col = |f: fn(&TrialResult) -> f64| trials.iter().map(f).collect::<Vec<f64>>();
        let hist = col(|t| t.hist_perf);
        let nntf = col(|t| t.nntf_perf);
        let diffs: Vec<f64> = hist.iter().zip(&nntf).map(|(h, n)| h - n).collect();
        let wilcoxon = wilcoxon_signed_rank(&diffs);
        let (b_max, k_max) = cfg.grid();
        let summary = Summary {
            hist_perf: MeanStd::of(&hist),
            nntf_perf: MeanStd::of(&nntf),
            hist_bins: MeanStd::of(&col(|t| t.hist_bins as f64)),
            nntf_bins: MeanStd::of(&col(|t| t.nntf_bins as f64)),
            nntf_k: MeanStd::of(&col(|t| t.nntf_k as f64)),
            p_value: wilcoxon.p_value,
            wilcoxon,
        };
        ResultsTable {
            dataset: cfg.label(),
            reduction: cfg.reduction,
            dims: cfg.dims,
            baseline: cfg.baseline,
            model: cfg.model,
            b_max,
            k_max,
            trials,
            summary,
        }
    }

    /// One-row text table with the usual column layout.
    pub fn to_text(&self) -> String {
        let s = &self.summary;
        let pm = |m: &MeanStd, digits: usize| format!("{:.*} ± {:.*}", digits, m.mean, digits, m.std);
        let headers = ["Dataset", "d-Red.", "Dim.", "Hist. Perf.", "Tucker Perf.", "Hist. Bins", "Tucker Bins", "Tucker k", "p-val"];
        let row = [
            self.dataset.clone(),
            self.reduction.label().to_string(),
            self.dims.to_string(),
            pm(&s.hist_perf, 3),
            pm(&s.nntf_perf, 3),
            pm(&s.hist_bins, 2),
            pm(&s.nntf_bins, 2),
            pm(&s.nntf_k, 2),
            format!("{:.2e}", s.p_value),
        ];
        let widths: Vec<usize> = headers
            .iter()
            .zip(&row)
            .map(|(h, r)| h.chars().count().max(r.chars().count()))
            .collect();
        let mut out = String::new();
        for (cells, sep) in [(headers.map(String::from).to_vec(), true), (row.to_vec(), false)] {
            let line: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if sep {
                let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            }
        }
        out
    }
}

fn run_trial(cfg: &ExperimentConfig, data: &Dataset, t: usize) -> Result<TrialResult> {
    let (b_max, k_max) = cfg.grid();
    let trial_seed = derive_seed(cfg.seed, &[t as u64]);
    let mut rng = rng_from_seed(trial_seed);
    let idx = sample(&mut rng, data.len(), data.len()).into_vec();
    let train = data.subset(&idx[..cfg.train_size]);
    let eval = data.subset(&idx[cfg.train_size..]);
    let cv_opts = |label: u64| CvOptions {
        folds: cfg.folds,
        fold_train: cfg.fold_train,
        fold_eval: cfg.fold_eval,
        seed: derive_seed(trial_seed, &[label]),
        fit: FitOptions { seed: derive_seed(trial_seed, &[label, 1]), ..cfg.fit.clone() },
    };
    let final_opts = FitOptions { seed: derive_seed(trial_seed, &[2]), ..cfg.fit.clone() };

    let base = cross_validate(&train, b_max, k_max, cfg.baseline, &cv_opts(0))?;
    let model = cross_validate(&train, b_max, k_max, cfg.model, &cv_opts(0))?;
    let hist = cfg.baseline.fit(&train, base.best_b, base.best_k, &final_opts)?;
    let nntf = cfg.model.fit(&train, model.best_b, model.best_k, &final_opts)?;
    Ok(TrialResult {
        trial: t,
        hist_perf: empirical_l2_risk(&hist, &eval)?,
        nntf_perf: empirical_l2_risk(&nntf, &eval)?,
        hist_bins: base.best_b,
        nntf_bins: model.best_b,
        nntf_k: model.best_k,
    })
}

/// Repeated train/evaluate trials comparing the baseline estimator with the
/// low-rank one, each tuned by cross-validation on the training split.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let data = cfg.load()?;
    if data.len() <= cfg.train_size {
        return Err(Error::precondition(format!(
            "dataset has {} points; need more than train_size = {}",
            data.len(),
            cfg.train_size
        )));
    }
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &data, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultsTable::from_trials(cfg, trials))
}
