use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use lowrank_hist::covers::DEFAULT_CAP;
use lowrank_hist::experiments::{
    cross_validate, default_grid, empirical_l2_risk, rate_experiment, run_experiment, CvOptions, CvResult,
    DataSource, Estimator, ExperimentConfig, RateOptions, RateTable, ResultsTable,
};
use lowrank_hist::factorization::{fit_nntf_histogram, FitOptions, FitReport, Factors, NntfModel};
use lowrank_hist::histogram::{fit_standard_histogram, Dataset, HistogramDensity};
use lowrank_hist::rng::derive_seed;
use lowrank_hist::scheffe::select_from_cover;
use lowrank_hist::{json, Error};
use serde::{Deserialize, Serialize};

use crate::{bounds, Cli, CliError, Command};

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with one point per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Skip the first row of the CSV.
    #[arg(long)]
    pub header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        Ok(Dataset::read_csv(&self.data, self.header)?)
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    /// Random restarts per fit; the lowest objective wins.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

impl SolverArgs {
    fn options(&self, seed: u64) -> FitOptions {
        FitOptions { max_iters: self.max_iters, rel_tol: self.rel_tol, restarts: self.restarts, seed }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bins per axis.
    #[arg(long, short)]
    pub bins: usize,
    /// Rank of the factorization; ignored by the standard histogram.
    #[arg(long, short, default_value_t = 1)]
    pub rank: usize,
    /// standard, tucker or multiview.
    #[arg(long, default_value = "tucker")]
    pub model: Estimator,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// JSON with a density, as written by `fit` or `cover-select`.
    #[arg(long)]
    pub density: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "tucker")]
    pub model: Estimator,
    /// Largest bin count tried; defaults depend on the dimension.
    #[arg(long)]
    pub b_max: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 80)]
    pub folds: usize,
    #[arg(long, default_value_t = 160)]
    pub fold_train: usize,
    #[arg(long, default_value_t = 40)]
    pub fold_eval: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub b_max: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CoverSelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, short)]
    pub bins: usize,
    #[arg(long, short, default_value_t = 1)]
    pub rank: usize,
    /// L1 radius of the cover.
    #[arg(long)]
    pub eps: f64,
    /// multiview or tucker.
    #[arg(long, default_value = "multiview")]
    pub model: NntfModel,
    /// Refuse covers with more members than this.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u128,
}

#[derive(Debug, Args)]
pub struct RateBenchArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Sample sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [1_000, 10_000, 100_000])]
    pub ns: Vec<usize>,
    /// Number of seeds, counting up from --seed.
    #[arg(long, default_value_t = 10)]
    pub replicates: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON written by `experiment` or `rate-bench`.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub model: Estimator,
    pub seed: u64,
    pub n: usize,
    pub dims: usize,
    pub bins: usize,
    pub rank: Option<usize>,
    pub density: HistogramDensity,
    pub factors: Option<Factors>,
    pub report: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskOutput {
    pub n: usize,
    pub dims: usize,
    pub bins: usize,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSelectOutput {
    pub model: NntfModel,
    pub n: usize,
    pub dims: usize,
    pub bins: usize,
    pub rank: usize,
    pub eps: f64,
    pub cardinality: u128,
    pub index: usize,
    pub density: HistogramDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stored {
    Experiment(ResultsTable),
    Rate(RateTable),
}

fn require_seed(cli: &Cli, what: &str) -> Result<u64, CliError> {
    cli.seed.ok_or_else(|| CliError::Usage(format!("{what} needs --seed")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|source| CliError::Core(Error::Io { path: path.display().to_string(), source }))
}

fn emit<T: Serialize>(cli: &Cli, value: &T, text: impl FnOnce(&T) -> String) -> Result<(), CliError> {
    let body = json::to_string(value)?;
    if let Some(path) = &cli.out {
        std::fs::write(path, &body)
            .map_err(|source| CliError::Write { path: path.display().to_string(), source })?;
    }
    let shown = if cli.json { body } else { text(value) };
    std::io::stdout()
        .lock()
        .write_all(shown.as_bytes())
        .map_err(|source| CliError::Write { path: "stdout".into(), source })
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => fit(cli, a),
        Command::Risk(a) => risk(cli, a),
        Command::Cv(a) => cv(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::CoverSelect(a) => cover_select(cli, a),
        Command::Bounds(a) if a.name == "list" => {
            println!("{}", bounds::available());
            Ok(())
        }
        Command::Bounds(a) => {
            let out = bounds::run(a)?;
            emit(cli, &out, bounds::BoundsOutput::to_text)
        }
        Command::RateBench(a) => rate_bench(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<(), CliError> {
    let seed = require_seed(cli, "fit")?;
    let data = a.data.load()?;
    let opts = a.solver.options(seed);
    opts.validate()?;
    let (density, factors, report, rank) = match a.model {
        Estimator::Standard => (fit_standard_histogram(&data, a.bins)?, None, None, None),
        Estimator::Tucker | Estimator::Multiview => {
            let model = if a.model == Estimator::Tucker { NntfModel::Tucker } else { NntfModel::Multiview };
            let f = fit_nntf_histogram(&data, a.bins, a.rank, model, &opts)?;
            (f.density, Some(f.factors), Some(f.report), Some(a.rank))
        }
    };
    let out = FitOutput {
        model: a.model,
        seed,
        n: data.len(),
        dims: data.dims(),
        bins: a.bins,
        rank,
        density,
        factors,
        report,
    };
    emit(cli, &out, |o| {
        let mut s = format!("model       {:?}\npoints      {} in d = {}\nbins        {}\n", o.model, o.n, o.dims, o.bins);
        if let Some(k) = o.rank {
            s.push_str(&format!("rank        {k}\n"));
        }
        if let Some(r) = &o.report {
            s.push_str(&format!(
                "objective   {:e}\niterations  {}{}\n",
                r.final_objective,
                r.iterations,
                if r.converged { " (converged)" } else { "" }
            ));
        }
        s
    })
}

fn risk(cli: &Cli, a: &RiskArgs) -> Result<(), CliError> {
    let raw: serde_json::Value = serde_json::from_str(&read_text(&a.density)?).map_err(Error::from)?;
    let inner = match raw.get("density") {
        Some(d) => d.clone(),
        None => raw,
    };
    let h: HistogramDensity = serde_json::from_value(inner).map_err(Error::from)?;
    let data = a.data.load()?;
    let out = RiskOutput { n: data.len(), dims: h.dims(), bins: h.bins(), risk: empirical_l2_risk(&h, &data)? };
    emit(cli, &out, |o| format!("risk {} (n = {}, d = {}, b = {})\n", o.risk, o.n, o.dims, o.bins))
}

fn cv(cli: &Cli, a: &CvArgs) -> Result<(), CliError> {
    let seed = require_seed(cli, "cv")?;
    let data = a.data.load()?;
    let (b_def, k_def) = default_grid(data.dims());
    let opts = CvOptions {
        folds: a.folds,
        fold_train: a.fold_train,
        fold_eval: a.fold_eval,
        seed: derive_seed(seed, &[0]),
        fit: a.solver.options(derive_seed(seed, &[1])),
    };
    let res = cross_validate(&data, a.b_max.unwrap_or(b_def), a.k_max.unwrap_or(k_def), a.model, &opts)?;
    emit(cli, &res, cv_text)
}

fn cv_text(r: &CvResult) -> String {
    let mut s = format!("best b = {}, k = {}, risk = {:.6}\n{:>4} {:>4} {:>12}\n", r.best_b, r.best_k, r.best_risk, "b", "k", "mean risk");
    for c in &r.cells {
        s.push_str(&format!("{:>4} {:>4} {:>12.6}\n", c.b, c.k, c.mean_risk));
    }
    s
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<(), CliError> {
    let mut raw: serde_json::Value = serde_json::from_str(&read_text(&a.config)?).map_err(Error::from)?;
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| CliError::Usage(format!("{} must hold a JSON object", a.config.display())))?;
    if let Some(seed) = cli.seed {
        obj.insert("seed".into(), seed.into());
    } else if !obj.contains_key("seed") {
        return Err(CliError::Usage("experiment needs --seed or a seed in the config".into()));
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(raw).map_err(Error::from)?;
    if let DataSource::Csv { path, .. } = &mut cfg.source {
        if path.is_relative() {
            if let Some(dir) = a.config.parent() {
                *path = dir.join(&*path);
            }
        }
    }
    cfg.trials = a.trials.unwrap_or(cfg.trials);
    cfg.folds = a.folds.unwrap_or(cfg.folds);
    cfg.b_max = a.b_max.or(cfg.b_max);
    cfg.k_max = a.k_max.or(cfg.k_max);
    let table = run_experiment(&cfg)?;
    emit(cli, &table, ResultsTable::to_text)
}

fn cover_select(cli: &Cli, a: &CoverSelectArgs) -> Result<(), CliError> {
    let data = a.data.load()?;
    let sel = select_from_cover(&data, data.dims(), a.bins, a.rank, a.eps, a.model, a.cap)?;
    let out = CoverSelectOutput {
        model: a.model,
        n: data.len(),
        dims: data.dims(),
        bins: a.bins,
        rank: a.rank,
        eps: a.eps,
        cardinality: sel.cardinality,
        index: sel.index,
        density: sel.density,
    };
    emit(cli, &out, |o| {
        format!("selected member {} of {} ({:?}, b = {}, k = {}, eps = {})\n", o.index, o.cardinality, o.model, o.bins, o.rank, o.eps)
    })
}

fn rate_bench(cli: &Cli, a: &RateBenchArgs) -> Result<(), CliError> {
    let seed = require_seed(cli, "rate-bench")?;
    let seeds = (0..a.replicates)
        .map(|r| seed.checked_add(r))
        .collect::<Option<Vec<u64>>>()
        .ok_or_else(|| CliError::Usage("--seed + --replicates overflows".into()))?;
    let table = rate_experiment(&RateOptions { d: a.d, ns: a.ns.clone(), seeds, fit: a.solver.options(0) })?;
    emit(cli, &table, RateTable::to_text)
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<(), CliError> {
    let stored: Stored = serde_json::from_str(&read_text(&a.input)?).map_err(|_| {
        CliError::Usage(format!("{} is not an experiment or rate-bench result", a.input.display()))
    })?;
    emit(cli, &stored, |s| match s {
        Stored::Experiment(t) => t.to_text(),
        Stored::Rate(t) => t.to_text(),
    })
}
