//! Composite tolerance index: first principal component of the standardized
//! factor scores, plus reliability and distribution summaries.

use crate::sem::{FactorScores, LATENT_GENDER_GAP};
use crate::stats::{mean, percentile_sorted, sorted_symmetric_eigen, std_dev};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompositeError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("input {0} is constant")]
    ConstantInput(String),
    #[error("correlation matrix of the inputs is degenerate")]
    DegenerateCorrelation,
    #[error("reliability needs at least two items, got {0}")]
    TooFewItems(usize),
    #[error("{names} names and {flags} reverse flags for {columns} columns")]
    ShapeMismatch { names: usize, flags: usize, columns: usize },
}

pub type Result<T> = std::result::Result<T, CompositeError>;

/// Explained-variance share below which the leading component is flagged.
pub const LOW_EXPLAINED_VARIANCE: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    /// Sample standard deviation (divisor n − 1).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeModel {
    pub inputs: Vec<String>,
    pub standardizers: Vec<Standardizer>,
    /// Inputs negated after standardization.
    pub reverse: Vec<bool>,
    /// Unit-norm leading eigenvector, first entry positive.
    pub phi: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance: f64,
    pub low_explained_variance: bool,
    pub sign_convention: String,
}

impl CompositeModel {
    /// Standardized, reverse-coded inputs for one respondent.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.standardizers)
            .zip(&self.reverse)
            .map(|((x, s), &rev)| {
                let z = (x - s.mean) / s.sd;
                if rev {
                    -z
                } else {
                    z
                }
            })
            .collect()
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.transform(row).iter().zip(&self.phi).map(|(z, p)| z * p).sum()
    }

    pub fn score_all(&self, data: &DMatrix<f64>) -> Vec<f64> {
        (0..data.nrows())
            .into_par_iter()
            .map(|i| self.score(&data.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

/// Fit the composite on an `n × k` matrix of inputs and score every row.
pub fn build_composite(data: &DMatrix<f64>, names: &[String], reverse: &[bool]) -> Result<(CompositeModel, Vec<f64>)> {
    let (n, k) = data.shape();
    if names.len() != k || reverse.len() != k {
        return Err(CompositeError::ShapeMismatch { names: names.len(), flags: reverse.len(), columns: k });
    }
    if n < 4 {
        return Err(CompositeError::TooFewObservations { needed: 4, got: n });
    }
    let mut standardizers = Vec::with_capacity(k);
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        let sd = std_dev(&col);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(CompositeError::ConstantInput(name.clone()));
        }
        standardizers.push(Standardizer { mean: mean(&col), sd });
    }
    let mut model = CompositeModel {
        inputs: names.to_vec(),
        standardizers,
        reverse: reverse.to_vec(),
        phi: vec![0.0; k],
        eigenvalues: vec![],
        explained_variance: 0.0,
        low_explained_variance: false,
        sign_convention: "phi_1_positive".into(),
    };

    let z = DMatrix::from_fn(n, k, |i, j| {
        let s = model.standardizers[j];
        let v = (data[(i, j)] - s.mean) / s.sd;
        if reverse[j] {
            -v
        } else {
            v
        }
    });
    // z already has unit variance, so its covariance is the correlation.
    let corr = z.transpose() * &z / (n - 1) as f64;
    if corr.iter().any(|v| !v.is_finite()) {
        return Err(CompositeError::DegenerateCorrelation);
    }
    let (values, vectors) = sorted_symmetric_eigen(&corr);
    if !(values[0] > 0.0) {
        return Err(CompositeError::DegenerateCorrelation);
    }
    let mut phi: Vec<f64> = vectors.column(0).iter().copied().collect();
    let pivot = phi.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
    if pivot < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    model.phi = phi;
    model.explained_variance = values[0] / k as f64;
    model.low_explained_variance = model.explained_variance < LOW_EXPLAINED_VARIANCE;
    model.eigenvalues = values;

    let index = model.score_all(data);
    Ok((model, index))
}

/// Composite from factor scores with the time-use factor reverse coded.
pub fn build_from_factor_scores(scores: &FactorScores) -> Result<(CompositeModel, Vec<f64>)> {
    let reverse: Vec<bool> = scores.latents.iter().map(|l| l == LATENT_GENDER_GAP).collect();
    build_composite(&scores.scores, &scores.latents, &reverse)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub items: usize,
    pub average_covariance: f64,
    pub average_variance: f64,
    pub alpha: f64,
}

/// Cronbach's alpha from an `n × k` item matrix (covariances with n − 1).
pub fn cronbach_alpha(items: &DMatrix<f64>) -> Result<ReliabilityReport> {
    let (n, k) = items.shape();
    if k < 2 {
        return Err(CompositeError::TooFewItems(k));
    }
    if n < 2 {
        return Err(CompositeError::TooFewObservations { needed: 2, got: n });
    }
    let (_, cov) = crate::stats::column_covariance(items, (n - 1) as f64);
    cronbach_alpha_from_cov(&cov)
}

/// `α = k·c̄ / (v̄ + (k − 1)·c̄)`.
pub fn cronbach_alpha_from_cov(cov: &DMatrix<f64>) -> Result<ReliabilityReport> {
    let k = cov.nrows();
    if k < 2 {
        return Err(CompositeError::TooFewItems(k));
    }
    let v_bar = cov.trace() / k as f64;
    let c_bar = (cov.sum() - cov.trace()) / (k * (k - 1)) as f64;
    let kf = k as f64;
    Ok(ReliabilityReport {
        items: k,
        average_covariance: c_bar,
        average_variance: v_bar,
        alpha: kf * c_bar / (v_bar + (kf - 1.0) * c_bar),
    })
}

pub const DENSITY_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexDistribution {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Grid point with the highest density.
    pub mode: f64,
}

/// Summary statistics and a Gaussian kernel density estimate.
pub fn index_distribution(values: &[f64]) -> Result<IndexDistribution> {
    let n = values.len();
    if n < 30 {
        return Err(CompositeError::TooFewObservations { needed: 30, got: n });
    }
    let m = mean(values);
    let sd = std_dev(values);
    let m2 = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    let m3 = values.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n as f64;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bandwidth = if spread > 0.0 { 0.9 * spread * (n as f64).powf(-0.2) } else { 1e-3 };

    let lo = sorted[0] - 3.0 * bandwidth;
    let hi = sorted[n - 1] + 3.0 * bandwidth;
    let step = (hi - lo) / (DENSITY_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..DENSITY_POINTS).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (n as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let density: Vec<f64> = grid
        .par_iter()
        .map(|&g| values.iter().map(|v| (-0.5 * ((g - v) / bandwidth).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    let peak = density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    Ok(IndexDistribution { n, mean: m, sd, skewness, bandwidth, mode: grid[peak], grid, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn names() -> Vec<String> {
        ["j", "m", "t"].map(String::from).to_vec()
    }

    fn normals(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identical_inputs_give_equal_weights() {
        let base = normals(50, 1, 1);
        let data = DMatrix::from_fn(50, 3, |i, _| base[(i, 0)]);
        let (model, index) = build_composite(&data, &names(), &[false; 3]).unwrap();
        for p in &model.phi {
            assert!((p - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        }
        let z = model.transform(&[base[(7, 0)]; 3])[0];
        assert!((index[7] - 3f64.sqrt() * z).abs() < 1e-10);
    }

    #[test]
    fn independent_inputs_are_flagged() {
        let (model, _) = build_composite(&normals(20_000, 3, 2), &names(), &[false; 3]).unwrap();
        assert!((model.explained_variance - 1.0 / 3.0).abs() < 0.03);
        assert!(model.low_explained_variance);
    }

    #[test]
    fn reflecting_an_input_flips_its_weight_only() {
        let data = normals(200, 3, 3);
        let mixed = DMatrix::from_fn(200, 3, |i, j| data[(i, j)] + 0.8 * data[(i, 0)]);
        let (a, ia) = build_composite(&mixed, &names(), &[false; 3]).unwrap();
        let mut flipped = mixed.clone();
        flipped.column_mut(1).neg_mut();
        let (b, ib) = build_composite(&flipped, &names(), &[false; 3]).unwrap();
        assert!((a.phi[1] + b.phi[1]).abs() < 1e-12);
        assert!((a.phi[0] - b.phi[0]).abs() < 1e-12);
        for (x, y) in ia.iter().zip(&ib) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn index_has_zero_mean_and_unit_phi() {
        let (model, index) = build_composite(&normals(300, 3, 4), &names(), &[false, false, true]).unwrap();
        assert!(mean(&index).abs() < 1e-12);
        assert!((model.phi.iter().map(|p| p * p).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(model.phi[0] > 0.0);
    }

    #[test]
    fn errors() {
        let data = normals(3, 3, 5);
        assert_eq!(
            build_composite(&data, &names(), &[false; 3]).unwrap_err(),
            CompositeError::TooFewObservations { needed: 4, got: 3 }
        );
        let mut data = normals(10, 3, 5);
        data.column_mut(2).fill(1.0);
        assert_eq!(build_composite(&data, &names(), &[false; 3]).unwrap_err(), CompositeError::ConstantInput("t".into()));
        assert_eq!(cronbach_alpha(&normals(10, 1, 5)).unwrap_err(), CompositeError::TooFewItems(1));
    }

    /// `k/(k−1) · (1 − Σσ²ᵢ / σ²_total)`.
    fn alpha_oracle(items: &DMatrix<f64>) -> f64 {
        let k = items.ncols() as f64;
        let col_var: f64 = (0..items.ncols())
            .map(|j| crate::stats::variance(&items.column(j).iter().copied().collect::<Vec<_>>()))
            .sum();
        let totals: Vec<f64> = (0..items.nrows()).map(|i| items.row(i).sum()).collect();
        k / (k - 1.0) * (1.0 - col_var / crate::stats::variance(&totals))
    }

    #[test]
    fn alpha_closed_forms() {
        let mut cov = DMatrix::from_element(3, 3, 0.5);
        cov.fill_diagonal(1.0);
        assert!((cronbach_alpha_from_cov(&cov).unwrap().alpha - 0.75).abs() < 1e-15);

        let mut cov = DMatrix::from_element(3, 3, 0.263);
        cov.fill_diagonal(0.489);
        assert!((cronbach_alpha_from_cov(&cov).unwrap().alpha - 0.777).abs() < 5e-4);

        let r = cronbach_alpha(&normals(50_000, 3, 6)).unwrap();
        assert!(r.alpha.abs() < 0.03);
    }

    #[test]
    fn alpha_matches_variance_of_total_form() {
        let base = normals(400, 4, 7);
        let items = DMatrix::from_fn(400, 4, |i, j| base[(i, j)] + base[(i, 0)] * (j as f64 + 0.5));
        let r = cronbach_alpha(&items).unwrap();
        assert!((r.alpha - alpha_oracle(&items)).abs() < 1e-12);
    }

    #[test]
    fn distribution_of_normal_sample() {
        let data = normals(100_000, 1, 8);
        let d = index_distribution(data.as_slice()).unwrap();
        assert!(d.skewness.abs() < 0.1);
        assert_eq!(d.grid.len(), DENSITY_POINTS);
        let step = d.grid[1] - d.grid[0];
        let area: f64 = d.density.iter().sum::<f64>() * step;
        assert!((area - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mode_at_the_constant() {
        let mut v = vec![2.0; 60];
        v.push(40.0);
        let d = index_distribution(&v).unwrap();
        let step = d.grid[1] - d.grid[0];
        assert!((d.mode - 2.0).abs() <= step);
        assert!(d.skewness > 0.0);
    }

    #[test]
    fn skewed_sample_has_mode_below_mean() {
        let data = normals(5000, 1, 9);
        let v: Vec<f64> = data.iter().map(|x| x.exp()).collect();
        let d = index_distribution(&v).unwrap();
        assert!(d.skewness > 0.0 && d.mode < d.mean);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ranking_invariant_to_affine_rescaling(seed in 0u64..1000, a in 0.1f64..10.0, b in -50.0f64..50.0, col in 0usize..3) {
            let base = normals(40, 3, seed);
            let data = DMatrix::from_fn(40, 3, |i, j| base[(i, j)] + 0.6 * base[(i, 0)]);
            let (_, before) = build_composite(&data, &names(), &[false, false, true]).unwrap();
            let mut scaled = data.clone();
            scaled.column_mut(col).apply(|v| *v = a * *v + b);
            let (_, after) = build_composite(&scaled, &names(), &[false, false, true]).unwrap();
            for (x, y) in before.iter().zip(&after) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn reverse_flag_toggle_is_bit_identical(seed in 0u64..1000) {
            let base = normals(30, 3, seed);
            let data = DMatrix::from_fn(30, 3, |i, j| base[(i, j)] - 0.5 * base[(i, 0)]);
            let (_, a) = build_composite(&data, &names(), &[false, false, true]).unwrap();
            let mut neg = data.clone();
            neg.column_mut(2).neg_mut();
            let (_, b) = build_composite(&neg, &names(), &[false, false, false]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn alpha_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let base = normals(30, 3, seed);
            let items = DMatrix::from_fn(30, 3, |i, j| base[(i, j)] + base[(i, 0)]);
            let a = cronbach_alpha(&items).unwrap().alpha;
            let b = cronbach_alpha(&(items * c)).unwrap().alpha;
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
