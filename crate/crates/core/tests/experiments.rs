mod common;

use common::{points, tensor};
use lowrank_hist::experiments::{
    cross_validate, empirical_l2_risk, pca_project, random_basis, random_project, run_experiment, scale_to_unit_cube,
    wilcoxon_signed_rank, CvOptions, DataSource, Estimator, ExperimentConfig, Reduction, SyntheticSpec,
};
use lowrank_hist::factorization::FitOptions;
use lowrank_hist::histogram::{fit_standard_histogram, inner_product, tensor_to_histogram, Dataset, DatasetMeta};
use lowrank_hist::json;
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, cols), rows)
}

fn total_variance(m: &[Vec<f64>]) -> f64 {
    let n = m.len() as f64;
    (0..m[0].len())
        .map(|j| {
            let mean = m.iter().map(|r| r[j]).sum::<f64>() / n;
            m.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn risk_identity_for_fitted_estimators(
        (d, pts) in (1usize..=3).prop_flat_map(|d| (Just(d), points(d, 4..=120))),
        b in 1usize..=5,
        k in 1usize..=5,
        which in 0usize..3,
    ) {
        let data = Dataset::new(d, pts, DatasetMeta::default()).unwrap();
        let est = [Estimator::Standard, Estimator::Tucker, Estimator::Multiview][which];
        let h = est.fit(&data, b, k.min(b), &FitOptions { max_iters: 50, ..FitOptions::default() }).unwrap();
        let hx = fit_standard_histogram(&data, b).unwrap();
        let lhs = empirical_l2_risk(&h, &data).unwrap();
        let rhs = h.l2_norm_sq() - 2.0 * inner_product(&h, &hx).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn risk_identity_for_arbitrary_histograms(
        (t, pts) in (1usize..=3, 1usize..=5).prop_flat_map(|(d, b)| (tensor(d, b), points(d, 1..=60)))
    ) {
        let d = t.dims();
        let b = t.bins();
        let h = tensor_to_histogram(t);
        let data = Dataset::new(d, pts, DatasetMeta::default()).unwrap();
        let lhs = empirical_l2_risk(&h, &data).unwrap();
        let rhs = h.l2_norm_sq() - 2.0 * inner_product(&h, &fit_standard_histogram(&data, b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn full_pca_preserves_variance(m in (1usize..=4).prop_flat_map(|c| matrix(3..=30, c))) {
        let p = pca_project(&m, m[0].len()).unwrap();
        prop_assert!((total_variance(&p) - total_variance(&m)).abs() <= 1e-9 * total_variance(&m).max(1.0));
    }

    #[test]
    fn random_projections_nest(m in (2usize..=5).prop_flat_map(|c| matrix(2..=20, c)), seed in any::<u64>()) {
        let cols = m[0].len();
        let full = random_project(&m, cols, seed).unwrap();
        for d in 1..cols {
            let part = random_project(&m, d, seed).unwrap();
            for (a, b) in part.iter().zip(&full) {
                prop_assert_eq!(&a[..], &b[..d]);
            }
        }
    }

    #[test]
    fn random_basis_is_orthonormal(dim in 1usize..=8, seed in any::<u64>()) {
        let q = random_basis(dim, seed);
        for i in 0..dim {
            for j in 0..dim {
                let dot: f64 = (0..dim).map(|r| q[r][i] * q[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn scaled_data_lies_in_the_unit_cube(m in (1usize..=4).prop_flat_map(|c| matrix(1..=30, c))) {
        let ds = scale_to_unit_cube(&m).unwrap();
        prop_assert!(ds.flat().iter().all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn wilcoxon_p_is_a_probability_and_sign_symmetric(x in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        let p = wilcoxon_signed_rank(&x).p_value;
        prop_assert!((0.0..=1.0).contains(&p));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((wilcoxon_signed_rank(&neg).p_value - p).abs() <= 1e-12);
    }
}

/// Exact two-sided p by enumerating all sign patterns of the ranks 1..=n.
fn enumerate_p(n: usize, w_plus: f64) -> f64 {
    let total = (n * (n + 1) / 2) as f64;
    let mean = total / 2.0;
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| (i + 1) as f64).sum();
        if (w - mean).abs() >= (w_plus - mean).abs() - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

#[test]
fn exact_wilcoxon_matches_enumeration() {
    let cases: [&[f64]; 4] = [
        &[0.5, -1.2, 2.0, 3.1, -0.1, 4.0],
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, -12.0],
        &[-3.0, 1.5, 2.5],
        &[0.2, -0.4, 0.6, -0.8, 1.0, 1.2, 1.4, -1.6],
    ];
    for diffs in cases {
        let r = wilcoxon_signed_rank(diffs);
        assert!(r.exact);
        let want = enumerate_p(diffs.len(), r.w_plus);
        assert!((r.p_value - want).abs() <= 1e-12, "{diffs:?}: {} vs {want}", r.p_value);
    }
}

#[test]
fn collinear_points_have_one_principal_component() {
    let m: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
    let p = pca_project(&m, 2).unwrap();
    let first: f64 = p.iter().map(|r| r[0] * r[0]).sum();
    let second: f64 = p.iter().map(|r| r[1] * r[1]).sum();
    assert!(first / (first + second) >= 1.0 - 1e-9);
}

#[test]
fn cross_validation_prefers_moderate_bins_on_separable_data() {
    let spec = SyntheticSpec::random_multiview(2, 1, 4, 3).unwrap();
    let mut below = 0;
    for s in 0..20 {
        let data = spec.sample(200, s).unwrap();
        let opts = CvOptions { folds: 20, seed: s, ..CvOptions::default() };
        let r = cross_validate(&data, 15, 1, Estimator::Standard, &opts).unwrap();
        below += (r.best_b < 15) as usize;
    }
    assert!(below >= 18, "{below}/20");
}

fn smoke_config() -> ExperimentConfig {
    ExperimentConfig {
        name: Some("smoke".into()),
        source: DataSource::Synthetic { spec: SyntheticSpec::random_multiview(3, 2, 3, 1).unwrap(), n: 300, seed: None },
        reduction: Reduction::None,
        dims: 3,
        b_max: Some(3),
        k_max: Some(2),
        trials: 4,
        folds: 3,
        train_size: 200,
        fold_train: 160,
        fold_eval: 40,
        seed: 12,
        model: Estimator::Tucker,
        baseline: Estimator::Standard,
        fit: FitOptions { max_iters: 50, ..FitOptions::default() },
    }
}

#[test]
fn experiments_are_reproducible_across_thread_counts() {
    let cfg = smoke_config();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = json::to_string(&one.install(|| run_experiment(&cfg)).unwrap()).unwrap();
    let b = json::to_string(&four.install(|| run_experiment(&cfg)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_arms_have_p_one() {
    let cfg = ExperimentConfig { model: Estimator::Standard, ..smoke_config() };
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.summary.p_value, 1.0);
    assert_eq!(t.trials.len(), cfg.trials);
}

#[test]
fn pca_pipeline_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    let mut text = String::from("a,b,c\n");
    for i in 0..260 {
        let x = (i as f64 * 0.37).sin();
        text.push_str(&format!("{x},{},{}\n", (i as f64 * 0.11).cos(), x * 3.0 + 0.01 * i as f64));
    }
    std::fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig {
        source: DataSource::Csv { path, header: true },
        reduction: Reduction::Pca,
        dims: 2,
        trials: 2,
        ..smoke_config()
    };
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.trials.len(), 2);
    assert!(t.to_text().contains("PCA"));
    let too_small = ExperimentConfig { train_size: 300, fold_train: 260, ..cfg };
    assert!(run_experiment(&too_small).is_err());
}
