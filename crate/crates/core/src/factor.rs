//! Correlation estimation, PCA eigenvalues and Horn's parallel analysis.

use crate::derive::IndicatorMatrix;
use crate::stats::{column_covariance, percentile_sorted, sorted_symmetric_eigen};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FactorError {
    #[error("column {0:?} is constant")]
    ConstantColumn(String),
    #[error("{n} complete rows is too few for {p} variables (need at least p + 1)")]
    TooFewRows { n: usize, p: usize },
    #[error("invalid parallel analysis settings: {0}")]
    InvalidSettings(String),
}

pub type Result<T> = std::result::Result<T, FactorError>;

/// Symmetric matrix over named variables. For a correlation matrix the
/// diagonal is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub names: Vec<String>,
    /// Observations used after listwise deletion.
    pub n: usize,
    /// Rows dropped by listwise deletion.
    pub dropped: usize,
    pub matrix: DMatrix<f64>,
}

/// Pearson correlation matrix with listwise deletion of incomplete rows.
pub fn correlation_matrix(data: &IndicatorMatrix) -> Result<CovMatrix> {
    let (complete, dropped) = data.complete_cases();
    let (n, p) = (complete.nrows(), complete.ncols());
    if n < p + 1 {
        return Err(FactorError::TooFewRows { n, p });
    }
    let (_, cov) = column_covariance(&complete.data, n as f64 - 1.0);
    for j in 0..p {
        let scale = complete.data.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if cov[(j, j)] <= 1e-24 * scale * scale {
            return Err(FactorError::ConstantColumn(complete.names[j].clone()));
        }
    }
    Ok(CovMatrix { names: complete.names.clone(), n, dropped, matrix: cov_to_corr(&cov) })
}

fn cov_to_corr(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let p = cov.nrows();
    let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) })
}

/// Eigenvalues of a correlation matrix, descending.
pub fn pca_eigenvalues(corr: &CovMatrix) -> Vec<f64> {
    sorted_symmetric_eigen(&corr.matrix).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelAnalysisSettings {
    pub replications: usize,
    pub percentile: f64,
    pub seed: u64,
}

impl Default for ParallelAnalysisSettings {
    fn default() -> Self {
        ParallelAnalysisSettings { replications: 1000, percentile: 95.0, seed: 20_240_601 }
    }
}

impl ParallelAnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(FactorError::InvalidSettings(format!("replications {} < 100", self.replications)));
        }
        if !(self.percentile > 50.0 && self.percentile < 100.0) {
            return Err(FactorError::InvalidSettings(format!("percentile {} outside (50, 100)", self.percentile)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelAnalysisResult {
    pub observed_eigenvalues: Vec<f64>,
    pub threshold_eigenvalues: Vec<f64>,
    pub n_retained: usize,
    pub replications: usize,
    pub percentile: f64,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
}

/// Length of the leading run where observed exceeds threshold.
pub fn retained_count(observed: &[f64], threshold: &[f64]) -> usize {
    observed.iter().zip(threshold).take_while(|(o, t)| o > t).count()
}

/// Eigenvalues of the correlation matrix of one `n × p` standard normal draw.
/// Replication `index` draws from stream `index` of a ChaCha generator keyed
/// by `seed`, so results do not depend on scheduling.
pub fn random_correlation_eigenvalues(n: usize, p: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let draws = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let (_, cov) = column_covariance(&draws, n as f64 - 1.0);
    sorted_symmetric_eigen(&cov_to_corr(&cov)).0
}

/// Per-position percentile of random-data eigenvalues.
pub fn random_eigenvalue_thresholds(n: usize, p: usize, settings: &ParallelAnalysisSettings) -> Vec<f64> {
    let reps: Vec<Vec<f64>> = (0..settings.replications as u64)
        .into_par_iter()
        .map(|r| random_correlation_eigenvalues(n, p, settings.seed, r))
        .collect();
    (0..p)
        .map(|k| {
            let mut col: Vec<f64> = reps.iter().map(|e| e[k]).collect();
            col.sort_by(f64::total_cmp);
            percentile_sorted(&col, settings.percentile)
        })
        .collect()
}

pub fn parallel_analysis(data: &IndicatorMatrix, settings: &ParallelAnalysisSettings) -> Result<ParallelAnalysisResult> {
    settings.validate()?;
    let corr = correlation_matrix(data)?;
    let observed = pca_eigenvalues(&corr);
    let p = observed.len();
    let threshold = random_eigenvalue_thresholds(corr.n, p, settings);
    Ok(ParallelAnalysisResult {
        n_retained: retained_count(&observed, &threshold),
        observed_eigenvalues: observed,
        threshold_eigenvalues: threshold,
        replications: settings.replications,
        percentile: settings.percentile,
        seed: settings.seed,
        n: corr.n,
        p,
    })
}
