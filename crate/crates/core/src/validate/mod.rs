//! Regression harness: OLS with classical, robust and clustered standard
//! errors, subgroup regressions, and probit average marginal effects.

mod ols;
mod probit;
mod subgroup;

pub use ols::{ols_fit, OlsResult, SeKind};
pub use probit::{probit_ame, probit_fit, FocalKind, ProbitFit, ProbitResult};
pub use subgroup::{subgroup_regressions, GroupSpec, SubgroupResult};

use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ValidateError {
    #[error("design matrix is rank deficient ({n} rows, {k} columns)")]
    RankDeficient { n: usize, k: usize },
    #[error("clustered errors need at least two clusters, got {0}")]
    TooFewClusters(usize),
    #[error("cluster key required for clustered standard errors")]
    MissingClusters,
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("outcome must be 0/1 with both classes present")]
    InvalidBinaryOutcome,
    #[error("probit estimates diverge: the outcome is separated by the regressors")]
    Separation,
    #[error("probit did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("unknown regressor {0}")]
    UnknownRegressor(String),
}

pub type Result<T> = std::result::Result<T, ValidateError>;

/// Named regressors with an optional leading intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

pub const INTERCEPT: &str = "_cons";

impl Design {
    /// Intercept followed by the given columns.
    pub fn with_intercept(columns: &[(&str, &[f64])]) -> Self {
        let n = columns.first().map_or(0, |c| c.1.len());
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(columns.iter().map(|c| c.0.to_string()));
        let x = DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1].1[i] });
        Design { names, x }
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Design {
        Design { names: self.names.clone(), x: self.x.select_rows(rows) }
    }
}

/// Significance stars at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub statistic: f64,
    pub p: f64,
    pub stars: String,
}
