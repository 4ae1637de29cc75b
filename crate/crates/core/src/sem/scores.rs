use super::fit::align;
use super::{Result, SemError, SemEstimate};
use crate::derive::IndicatorMatrix;
use nalgebra::{Cholesky, DMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorScores {
    pub latents: Vec<String>,
    pub respondent_ids: Vec<String>,
    /// One row per respondent, one column per latent, standardized.
    pub scores: DMatrix<f64>,
    /// Rows skipped for missing indicators.
    pub skipped: usize,
}

impl FactorScores {
    pub fn column(&self, latent: &str) -> Option<Vec<f64>> {
        let j = self.latents.iter().position(|l| l == latent)?;
        Some(self.scores.column(j).iter().copied().collect())
    }
}

/// Regression-method scores `Ψ Λᵀ Σ⁻¹ (x − x̄)`, restandardized per latent.
pub fn factor_scores(est: &SemEstimate, data: &IndicatorMatrix) -> Result<FactorScores> {
    let (complete, skipped) = align(data, &est.spec)?.complete_cases();
    let n = complete.nrows();
    if n < 2 {
        return Err(SemError::TooFewObservations { n, free: est.spec.n_free() });
    }
    let w = Cholesky::new(est.implied.clone()).ok_or(SemError::NonPositiveDefiniteS)?.inverse();
    let weights = w * est.lambda() * est.psi();
    let means = complete.data.row_mean();
    let centered = DMatrix::from_fn(n, complete.ncols(), |i, j| complete.data[(i, j)] - means[j]);
    let mut scores = centered * weights;
    for mut col in scores.column_iter_mut() {
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        col.apply(|v| *v = (*v - m) / sd);
    }
    Ok(FactorScores { latents: est.spec.latents.clone(), respondent_ids: complete.respondent_ids, scores, skipped })
}
