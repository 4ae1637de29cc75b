use super::{stars, Coefficient, Design, Result, ValidateError};
use crate::stats::{inverse_mills, log_normal_cdf, normal_cdf, normal_pdf, two_sided_normal_p};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

const MAX_ITERATIONS: usize = 200;
const GRADIENT_TOL: f64 = 1e-8;
const DIVERGENCE_NORM: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitFit {
    pub coefficients: Vec<Coefficient>,
    pub n: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub beta: DVector<f64>,
    /// Inverse of the negative Hessian at the optimum.
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
}

fn log_likelihood(y: &[bool], x: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    let xb = x * beta;
    y.iter().zip(xb.iter()).map(|(&yi, &v)| log_normal_cdf(if yi { v } else { -v })).sum()
}

/// Gradient and negative Hessian of the log-likelihood.
fn derivatives(y: &[bool], x: &DMatrix<f64>, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let k = x.ncols();
    let xb = x * beta;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let q = if y[i] { 1.0 } else { -1.0 };
        let z = q * xb[i];
        let lambda = inverse_mills(z);
        let xi = x.row(i).transpose();
        g.axpy(q * lambda, &xi, 1.0);
        h.ger(lambda * (lambda + z), &xi, &xi, 1.0);
    }
    (g, h)
}

/// Maximum-likelihood probit by Newton's method with step halving.
pub fn probit_fit(y: &[f64], design: &Design) -> Result<ProbitFit> {
    let x = &design.x;
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(ValidateError::LengthMismatch { what: "outcome", expected: n, got: y.len() });
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(ValidateError::InvalidBinaryOutcome);
    }
    let yb: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
    if yb.iter().all(|&v| v) || yb.iter().all(|&v| !v) {
        return Err(ValidateError::InvalidBinaryOutcome);
    }
    if n <= k {
        return Err(ValidateError::RankDeficient { n, k });
    }

    let mut beta = DVector::zeros(k);
    let mut ll = log_likelihood(&yb, x, &beta);
    for iter in 0..MAX_ITERATIONS {
        let (g, h) = derivatives(&yb, x, &beta);
        if g.amax() < GRADIENT_TOL {
            let covariance = Cholesky::new(h).ok_or(ValidateError::RankDeficient { n, k })?.inverse();
            if separated(&yb, x, &beta) {
                return Err(ValidateError::Separation);
            }
            return Ok(finish(design, beta, covariance, ll, iter));
        }
        let step = Cholesky::new(h).ok_or(ValidateError::RankDeficient { n, k })?.solve(&g);
        // Slack for rounding in the summed likelihood near the optimum.
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut t = 1.0;
        loop {
            let cand = &beta + t * &step;
            let cand_ll = log_likelihood(&yb, x, &cand);
            if cand_ll >= ll - slack {
                beta = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(ValidateError::NoConvergence(iter));
            }
        }
        if beta.norm() > DIVERGENCE_NORM {
            return Err(ValidateError::Separation);
        }
    }
    Err(ValidateError::NoConvergence(MAX_ITERATIONS))
}

/// Every observation predicted with near certainty: the likelihood has no
/// finite maximum and the gradient test only stopped on underflow.
fn separated(y: &[bool], x: &DMatrix<f64>, beta: &DVector<f64>) -> bool {
    let xb = x * beta;
    y.iter().zip(xb.iter()).all(|(&yi, &v)| (if yi { v } else { -v }) > 5.0)
}

fn finish(design: &Design, beta: DVector<f64>, covariance: DMatrix<f64>, ll: f64, iterations: usize) -> ProbitFit {
    let coefficients = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = covariance[(j, j)].sqrt();
            let z = beta[j] / se;
            let p = two_sided_normal_p(z);
            Coefficient { name: name.clone(), estimate: beta[j], se, statistic: z, p, stars: stars(p).to_string() }
        })
        .collect();
    ProbitFit { coefficients, n: design.nrows(), log_likelihood: ll, iterations, beta, covariance }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalKind {
    Continuous,
    Binary,
    /// Binary when every value is 0 or 1.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitResult {
    pub fit: ProbitFit,
    pub focal: String,
    pub focal_kind: FocalKind,
    pub ame: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
    pub p: f64,
    pub n: usize,
}

/// Average marginal effect of `focal` with a delta-method standard error.
pub fn probit_ame(fit: &ProbitFit, design: &Design, focal: &str, kind: FocalKind) -> Result<ProbitResult> {
    let f = design.column_index(focal).ok_or_else(|| ValidateError::UnknownRegressor(focal.to_string()))?;
    let x = &design.x;
    let (n, k) = x.shape();
    let kind = match kind {
        FocalKind::Auto if x.column(f).iter().all(|&v| v == 0.0 || v == 1.0) => FocalKind::Binary,
        FocalKind::Auto => FocalKind::Continuous,
        other => other,
    };
    let beta = &fit.beta;
    let mut ame = 0.0;
    let mut grad = DVector::zeros(k);
    match kind {
        FocalKind::Binary => {
            for i in 0..n {
                let mut x1 = x.row(i).transpose();
                x1[f] = 1.0;
                let mut x0 = x1.clone();
                x0[f] = 0.0;
                let (z1, z0) = (x1.dot(beta), x0.dot(beta));
                ame += normal_cdf(z1) - normal_cdf(z0);
                grad += x1 * normal_pdf(z1) - x0 * normal_pdf(z0);
            }
        }
        _ => {
            for i in 0..n {
                let xi = x.row(i).transpose();
                let z = xi.dot(beta);
                let phi = normal_pdf(z);
                ame += phi * beta[f];
                grad.axpy(-z * phi * beta[f], &xi, 1.0);
                grad[f] += phi;
            }
        }
    }
    ame /= n as f64;
    grad /= n as f64;
    let se = (grad.transpose() * &fit.covariance * &grad)[(0, 0)].sqrt();
    let z = ame / se;
    Ok(ProbitResult {
        fit: fit.clone(),
        focal: focal.to_string(),
        focal_kind: kind,
        ame,
        se,
        ci_low: ame - 1.96 * se,
        ci_high: ame + 1.96 * se,
        z,
        p: two_sided_normal_p(z),
        n,
    })
}
