use super::SemEstimate;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorFit {
    pub indicator: String,
    pub latent: String,
    /// `λ² + ε`.
    pub fitted: f64,
    /// `λ²`.
    pub predicted: f64,
    /// `ε`.
    pub residual: f64,
    pub r2: f64,
    pub mc: f64,
    pub mc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitStats {
    pub indicators: Vec<IndicatorFit>,
    /// `1 − det(Θ)/det(S)`.
    pub cd: f64,
    /// Standardized residuals over the lower triangle including the diagonal.
    pub srmr: f64,
    pub srmr_includes_diagonal: bool,
    /// `n · F_ML`.
    pub chi_square: f64,
    pub df: i64,
}

pub fn fit_statistics(est: &SemEstimate) -> FitStats {
    let spec = &est.spec;
    let indicators = (0..spec.n_observed())
        .map(|k| {
            let lambda = est.params.loadings[k];
            let residual = est.params.residuals[k];
            let predicted = lambda * lambda;
            let fitted = predicted + residual;
            let r2 = predicted / fitted;
            IndicatorFit {
                indicator: spec.indicators[k].clone(),
                latent: spec.latents[spec.assignment[k]].clone(),
                fitted,
                predicted,
                residual,
                r2,
                mc: r2.sqrt(),
                mc2: r2,
            }
        })
        .collect();

    let theta_det: f64 = est.params.residuals.iter().product();
    let cd = 1.0 - theta_det / est.sample.determinant();

    let p = spec.n_observed();
    let s = &est.sample;
    let mut sum = 0.0;
    for i in 0..p {
        for j in 0..=i {
            let r = (s[(i, j)] - est.implied[(i, j)]) / (s[(i, i)] * s[(j, j)]).sqrt();
            sum += r * r;
        }
    }
    let srmr = (sum / (p * (p + 1) / 2) as f64).sqrt();

    FitStats {
        indicators,
        cd,
        srmr,
        srmr_includes_diagonal: true,
        chi_square: est.n as f64 * est.fmin,
        df: (p * (p + 1) / 2) as i64 - spec.n_free() as i64,
    }
}
