//! Confirmatory factor model with correlated latents, fitted by maximum
//! likelihood.
//!
//! Identification fixes every latent variance to one and frees all loadings,
//! so `Σ(θ) = Λ Ψ Λᵀ + Θ` with `Ψ` a correlation matrix and `Θ` diagonal.

mod fit;
mod fitstats;
mod inference;
mod model;
mod scores;

pub use fit::{fit_covariance, fit_ml, FitOptions};
pub use fitstats::{fit_statistics, FitStats, IndicatorFit};
pub use inference::{robust_se, ParamInference, StandardErrors};
pub use model::{implied_covariance, MlObjective, ModelParams, ParamKind};
pub use scores::{factor_scores, FactorScores};

use crate::derive::SEM_INDICATORS;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SemError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("data columns {found:?} do not match model indicators {expected:?}")]
    IndicatorMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("{n} complete rows is not more than the {free} free parameters")]
    TooFewObservations { n: usize, free: usize },
    #[error("sample covariance matrix is not positive definite")]
    NonPositiveDefiniteS,
    #[error("optimizer did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },
    #[error("information matrix is singular")]
    SingularInformation,
}

pub type Result<T> = std::result::Result<T, SemError>;

pub const LATENT_JUSTIFICATION: &str = "Justification";
pub const LATENT_MASCULINITY: &str = "Masculinity";
pub const LATENT_GENDER_GAP: &str = "GenderGapUnpaidWork";

/// Measurement structure: which latent each indicator loads on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemSpec {
    pub latents: Vec<String>,
    pub indicators: Vec<String>,
    /// `assignment[k]` is the latent index of indicator `k`.
    pub assignment: Vec<usize>,
}

impl Default for SemSpec {
    /// Justification (4 vignette items), Masculinity (5 items), gender gap in
    /// unpaid work (2 time-use gaps).
    fn default() -> Self {
        SemSpec {
            latents: vec![LATENT_JUSTIFICATION.into(), LATENT_MASCULINITY.into(), LATENT_GENDER_GAP.into()],
            indicators: SEM_INDICATORS.iter().map(|s| s.to_string()).collect(),
            assignment: vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2],
        }
    }
}

impl SemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.indicators.len() != self.assignment.len() {
            return Err(SemError::InvalidSpec("one latent assignment per indicator required".into()));
        }
        if self.latents.is_empty() {
            return Err(SemError::InvalidSpec("no latent variables".into()));
        }
        if let Some(bad) = self.assignment.iter().find(|&&a| a >= self.latents.len()) {
            return Err(SemError::InvalidSpec(format!("latent index {bad} out of range")));
        }
        for (l, name) in self.latents.iter().enumerate() {
            if !self.assignment.contains(&l) {
                return Err(SemError::InvalidSpec(format!("latent {name} has no indicators")));
            }
        }
        Ok(())
    }

    pub fn n_observed(&self) -> usize {
        self.indicators.len()
    }

    pub fn n_latent(&self) -> usize {
        self.latents.len()
    }

    /// Loadings, residual variances, then latent covariances (lower triangle,
    /// row-major).
    pub fn n_free(&self) -> usize {
        let m = self.n_latent();
        2 * self.n_observed() + m * (m - 1) / 2
    }

    /// Latent pairs `(a, b)` with `a > b`, in parameter order.
    pub fn latent_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.n_latent();
        (1..m).flat_map(|a| (0..a).map(move |b| (a, b))).collect()
    }
}

/// A converged fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SemEstimate {
    pub spec: SemSpec,
    pub params: ModelParams,
    /// Model-implied covariance Σ(θ).
    pub implied: DMatrix<f64>,
    /// Sample covariance S (divisor n).
    pub sample: DMatrix<f64>,
    pub sample_means: DVector<f64>,
    pub n: usize,
    /// Incomplete rows removed before fitting.
    pub dropped: usize,
    pub fmin: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Indicators whose residual variance sits at the lower bound.
    pub heywood: Vec<String>,
}

impl SemEstimate {
    pub fn loadings(&self) -> &[f64] {
        &self.params.loadings
    }

    pub fn residual_variances(&self) -> &[f64] {
        &self.params.residuals
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.params.psi
    }

    /// `λ² + ε` per indicator.
    pub fn fitted_variances(&self) -> Vec<f64> {
        self.params.loadings.iter().zip(&self.params.residuals).map(|(l, e)| l * l + e).collect()
    }

    /// `λ / sqrt(λ² + ε)`.
    pub fn standardized_loadings(&self) -> Vec<f64> {
        self.params.loadings.iter().zip(self.fitted_variances()).map(|(l, v)| l / v.sqrt()).collect()
    }

    /// Λ as a dense `p × m` matrix.
    pub fn lambda(&self) -> DMatrix<f64> {
        self.params.lambda(&self.spec)
    }

    pub fn heywood_warning(&self) -> bool {
        !self.heywood.is_empty()
    }
}
