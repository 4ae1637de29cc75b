use super::model::{sigma_derivatives, expected_information, MlObjective, ModelParams};
use super::{implied_covariance, Result, SemError, SemEstimate, SemSpec};
use crate::derive::IndicatorMatrix;
use crate::stats::column_covariance;
use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Infinity norm of the gradient in the optimizer's coordinates.
    pub gradient_tol: f64,
    /// Change in F relative to `max(|F|, 1)`.
    pub objective_tol: f64,
    pub max_iterations: usize,
    /// Residual variances below this fraction of the sample variance are
    /// flagged as Heywood cases.
    pub heywood_fraction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { gradient_tol: 1e-6, objective_tol: 1e-9, max_iterations: 10_000, heywood_fraction: 1e-6 }
    }
}

/// Select and order the model indicators from `data`.
pub(crate) fn align(data: &IndicatorMatrix, spec: &SemSpec) -> Result<IndicatorMatrix> {
    let order: Option<Vec<usize>> = spec.indicators.iter().map(|name| data.column_index(name)).collect();
    match order {
        Some(order) => Ok(data.permute_columns(&order)),
        None => Err(SemError::IndicatorMismatch { expected: spec.indicators.clone(), found: data.names.clone() }),
    }
}

/// Fit by maximum likelihood after listwise deletion.
pub fn fit_ml(data: &IndicatorMatrix, spec: &SemSpec, opts: &FitOptions) -> Result<SemEstimate> {
    spec.validate()?;
    let (complete, dropped) = align(data, spec)?.complete_cases();
    let n = complete.nrows();
    if n <= spec.n_free() {
        return Err(SemError::TooFewObservations { n, free: spec.n_free() });
    }
    let (means, s) = column_covariance(&complete.data, n as f64);
    let mut est = fit_covariance(spec, &s, n, opts)?;
    est.sample_means = means;
    est.dropped = dropped;
    Ok(est)
}

/// Fit to a sample covariance matrix (divisor n) directly.
pub fn fit_covariance(spec: &SemSpec, s: &DMatrix<f64>, n: usize, opts: &FitOptions) -> Result<SemEstimate> {
    let obj = MlObjective::new(spec.clone(), s.clone())?;
    let start = ModelParams::start_values(spec, s);
    let (u, iterations, gradient_norm) = minimize(&obj, start.to_unconstrained(spec), opts)?;

    let mut params = ModelParams::from_unconstrained(spec, &u);
    params.normalize_signs(spec);
    let fmin = obj.value(&params).ok_or(SemError::NonPositiveDefiniteS)?;
    let heywood = (0..spec.n_observed())
        .filter(|&k| params.residuals[k] < opts.heywood_fraction * s[(k, k)])
        .map(|k| spec.indicators[k].clone())
        .collect();
    Ok(SemEstimate {
        spec: spec.clone(),
        implied: implied_covariance(spec, &params),
        params,
        sample: s.clone(),
        sample_means: DVector::zeros(spec.n_observed()),
        n,
        dropped: 0,
        fmin,
        iterations,
        gradient_norm,
        heywood,
    })
}

struct Point {
    u: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

fn evaluate(obj: &MlObjective, u: DVector<f64>) -> Option<Point> {
    let params = ModelParams::from_unconstrained(&obj.spec, u.as_slice());
    let f = obj.value(&params)?;
    if !f.is_finite() {
        return None;
    }
    let jac = ModelParams::transform_jacobian(&obj.spec, u.as_slice());
    let g = obj.gradient(&params)?;
    let g = DVector::from_iterator(g.len(), g.iter().zip(&jac).map(|(a, b)| a * b));
    Some(Point { u, f, g })
}

/// Inverse of the expected information in unconstrained coordinates, used
/// to seed and reset the quasi-Newton approximation.
fn fisher_inverse(obj: &MlObjective, u: &DVector<f64>) -> DMatrix<f64> {
    let q = u.len();
    let params = ModelParams::from_unconstrained(&obj.spec, u.as_slice());
    let sigma = implied_covariance(&obj.spec, &params);
    let Some(chol) = Cholesky::new(sigma) else {
        return DMatrix::identity(q, q);
    };
    let info = expected_information(&chol.inverse(), &sigma_derivatives(&obj.spec, &params));
    let jac = ModelParams::transform_jacobian(&obj.spec, u.as_slice());
    let mut h = DMatrix::from_fn(q, q, |i, j| jac[i] * info[(i, j)] * jac[j]);
    let ridge = 1e-8 * (h.trace() / q as f64).max(1e-12);
    for i in 0..q {
        h[(i, i)] += ridge;
    }
    Cholesky::new(h).map(|c| c.inverse()).unwrap_or_else(|| DMatrix::identity(q, q))
}

/// A few Fisher scoring steps past the convergence point. Near the optimum
/// these converge quadratically, which pushes exact-fit problems down to
/// rounding error at negligible cost.
fn polish(obj: &MlObjective, mut x: Point) -> Point {
    for _ in 0..10 {
        let d = -(fisher_inverse(obj, &x.u) * &x.g);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            if let Some(p) = evaluate(obj, &x.u + t * &d) {
                if p.f <= x.f && p.g.amax() < x.g.amax() {
                    x = p;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || x.g.amax() < 1e-14 {
            break;
        }
    }
    x
}

/// BFGS with Armijo backtracking.
fn minimize(obj: &MlObjective, u0: Vec<f64>, opts: &FitOptions) -> Result<(Vec<f64>, usize, f64)> {
    let mut x = evaluate(obj, DVector::from_vec(u0)).ok_or(SemError::NonPositiveDefiniteS)?;
    let mut h = fisher_inverse(obj, &x.u);
    let mut last_df = f64::INFINITY;
    let mut fresh = true;

    for iter in 0..opts.max_iterations {
        let gnorm = x.g.amax();
        if gnorm < opts.gradient_tol && last_df <= opts.objective_tol * x.f.abs().max(1.0) {
            let x = polish(obj, x);
            let gnorm = x.g.amax();
            return Ok((x.u.as_slice().to_vec(), iter, gnorm));
        }
        let mut d = -(&h * &x.g);
        let mut slope = x.g.dot(&d);
        if !(slope < 0.0) {
            h = fisher_inverse(obj, &x.u);
            fresh = true;
            d = -(&h * &x.g);
            slope = x.g.dot(&d);
            if !(slope < 0.0) {
                d = -x.g.clone();
                slope = x.g.dot(&d);
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            if let Some(p) = evaluate(obj, &x.u + t * &d) {
                let flat = (p.f - x.f).abs() <= 1e-14 * x.f.abs().max(1.0) && p.g.amax() < gnorm;
                if p.f <= x.f + 1e-4 * t * slope || flat {
                    accepted = Some(p);
                    break;
                }
            }
            t *= 0.5;
        }

        let Some(next) = accepted else {
            if gnorm < opts.gradient_tol {
                return Ok((x.u.as_slice().to_vec(), iter, gnorm));
            }
            if fresh {
                return Err(SemError::NoConvergence { iterations: iter, gradient_norm: gnorm });
            }
            h = fisher_inverse(obj, &x.u);
            fresh = true;
            continue;
        };

        let s = &next.u - &x.u;
        let y = &next.g - &x.g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (rho * rho * yhy + rho) * &s * s.transpose() - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        last_df = (next.f - x.f).abs();
        x = next;
        fresh = false;
    }
    Err(SemError::NoConvergence { iterations: opts.max_iterations, gradient_norm: x.g.amax() })
}
