use proptest::prelude::*;
use std::sync::OnceLock;
use tadv_core::composite::build_composite;
use tadv_core::sem::{factor_scores, fit_ml, FitOptions, SemEstimate, SemSpec};
use tadv_core::synth::{simulate_indicators, GeneratorSpec};
use tadv_core::IndicatorMatrix;

const N: usize = 3_000;

fn sample() -> &'static (IndicatorMatrix, SemEstimate) {
    static CELL: OnceLock<(IndicatorMatrix, SemEstimate)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut spec = GeneratorSpec::paper_defaults();
        spec.seed = 11;
        let matrix = simulate_indicators(&spec, N).unwrap().matrix;
        let est = fit_ml(&matrix, &SemSpec::default(), &FitOptions::default()).unwrap();
        (matrix, est)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let spec = GeneratorSpec::paper_defaults();
    let a = simulate_indicators(&spec, 200).unwrap().matrix;
    let b = simulate_indicators(&spec, 200).unwrap().matrix;
    assert_eq!(a.data, b.data);
    let mut other = spec.clone();
    other.seed += 1;
    assert_ne!(simulate_indicators(&other, 200).unwrap().matrix.data, a.data);
}

#[test]
fn column_order_does_not_change_the_fit() {
    let (matrix, base) = sample();
    let order: Vec<usize> = (0..matrix.ncols()).rev().collect();
    let est = fit_ml(&matrix.permute_columns(&order), &SemSpec::default(), &FitOptions::default()).unwrap();
    for (a, b) in est.loadings().iter().zip(base.loadings()) {
        assert!(close(*a, *b, 1e-6), "{a} vs {b}");
    }
    assert!(close(est.fmin, base.fmin, 1e-9));
}

#[test]
fn factor_scores_are_standardized() {
    let (matrix, est) = sample();
    let scores = factor_scores(est, matrix).unwrap();
    for j in 0..scores.scores.ncols() {
        let col: Vec<f64> = scores.scores.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10, "{mean} {var}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rescaling_an_indicator_rescales_only_its_parameters(col in 0usize..11, c in 0.2f64..20.0) {
        let (matrix, base) = sample();
        let mut scaled = matrix.clone();
        scaled.data.column_mut(col).scale_mut(c);
        let est = fit_ml(&scaled, &SemSpec::default(), &FitOptions::default()).unwrap();
        for j in 0..11 {
            let k = if j == col { c } else { 1.0 };
            prop_assert!(close(est.loadings()[j], k * base.loadings()[j], 1e-5));
            prop_assert!(close(est.residual_variances()[j], k * k * base.residual_variances()[j], 1e-5));
            prop_assert!(close(est.standardized_loadings()[j], base.standardized_loadings()[j], 1e-6));
        }
        prop_assert!(close(est.fmin, base.fmin, 1e-8));
    }

    #[test]
    fn index_ranking_survives_indicator_rescaling(col in 0usize..11, c in 0.2f64..20.0) {
        let (matrix, base) = sample();
        let index = |m: &IndicatorMatrix, est: &SemEstimate| {
            let s = factor_scores(est, m).unwrap();
            build_composite(&s.scores, &s.latents, &[false, false, true]).unwrap().1
        };
        let reference = index(matrix, base);
        let mut scaled = matrix.clone();
        scaled.data.column_mut(col).scale_mut(c);
        let est = fit_ml(&scaled, &SemSpec::default(), &FitOptions::default()).unwrap();
        let moved = index(&scaled, &est);
        for (a, b) in reference.iter().zip(&moved) {
            prop_assert!(close(*a, *b, 1e-5));
        }
    }
}
