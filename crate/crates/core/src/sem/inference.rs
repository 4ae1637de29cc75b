use super::fit::align;
use super::model::{expected_information, sigma_derivatives, ParamKind};
use super::{Result, SemError, SemEstimate};
use crate::derive::IndicatorMatrix;
use crate::stats::two_sided_normal_p;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamInference {
    pub label: String,
    pub estimate: f64,
    /// Inverse expected information.
    pub se_naive: f64,
    /// Sandwich estimator.
    pub se_robust: f64,
    /// `estimate / se_robust`.
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub kinds: Vec<ParamKind>,
    pub params: Vec<ParamInference>,
    pub robust_covariance: DMatrix<f64>,
}

impl StandardErrors {
    pub fn get(&self, kind: ParamKind) -> Option<&ParamInference> {
        self.kinds.iter().position(|&k| k == kind).map(|i| &self.params[i])
    }
}

/// Sandwich standard errors `A⁻¹ B A⁻¹`, where `A` is the expected
/// information of the sample log-likelihood and `B` the outer product of the
/// per-observation scores.
pub fn robust_se(est: &SemEstimate, data: &IndicatorMatrix) -> Result<StandardErrors> {
    let spec = &est.spec;
    let (complete, _) = align(data, spec)?.complete_cases();
    let w = Cholesky::new(est.implied.clone()).ok_or(SemError::SingularInformation)?.inverse();
    let derivs = sigma_derivatives(spec, &est.params);
    let q = derivs.len();

    let a = expected_information(&w, &derivs) * (est.n as f64 / 2.0);
    let eig = SymmetricEigen::new(a.clone());
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-10 * hi) {
        return Err(SemError::SingularInformation);
    }
    let a_inv = Cholesky::new(a).ok_or(SemError::SingularInformation)?.inverse();

    // s_r = ½ (uᵀ D_r u − tr(W D_r)) with u = Σ⁻¹ (x − x̄).
    let traces: Vec<f64> = derivs.iter().map(|d| (&w * d).trace()).collect();
    let means = complete.data.row_mean();
    let mut b = DMatrix::zeros(q, q);
    let mut score = DVector::zeros(q);
    for i in 0..complete.nrows() {
        let dev = (complete.data.row(i) - &means).transpose();
        let u = &w * dev;
        for (r, d) in derivs.iter().enumerate() {
            score[r] = 0.5 * ((d * &u).dot(&u) - traces[r]);
        }
        b.ger(1.0, &score, &score, 1.0);
    }
    let robust = &a_inv * b * &a_inv;

    let kinds = ParamKind::all(spec);
    let values = est.params.to_vec(spec);
    let params = kinds
        .iter()
        .enumerate()
        .map(|(r, kind)| {
            let se_robust = robust[(r, r)].sqrt();
            let z = values[r] / se_robust;
            ParamInference {
                label: kind.label(spec),
                estimate: values[r],
                se_naive: a_inv[(r, r)].sqrt(),
                se_robust,
                z,
                p: two_sided_normal_p(z),
            }
        })
        .collect();
    Ok(StandardErrors { kinds, params, robust_covariance: robust })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sem::{fit_ml, implied_covariance, FitOptions, ModelParams, SemSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_model() -> (SemSpec, ModelParams) {
        let spec = SemSpec {
            latents: vec!["A".into(), "B".into()],
            indicators: ["a1", "a2", "a3", "b1", "b2", "b3"].map(String::from).to_vec(),
            assignment: vec![0, 0, 0, 1, 1, 1],
        };
        let mut psi = DMatrix::identity(2, 2);
        psi[(0, 1)] = 0.3;
        psi[(1, 0)] = 0.3;
        let params = ModelParams {
            loadings: vec![1.0, 0.8, 1.2, 2.0, 1.5, 1.0],
            residuals: vec![0.5, 0.6, 0.7, 1.0, 1.2, 0.8],
            psi,
        };
        (spec, params)
    }

    fn sample(spec: &SemSpec, params: &ModelParams, n: usize, seed: u64, skewed: bool) -> IndicatorMatrix {
        let l = Cholesky::new(implied_covariance(spec, params)).unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = spec.n_observed();
        let z = DMatrix::from_fn(n, p, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            if skewed {
                (x * x - 1.0) / 2f64.sqrt()
            } else {
                x
            }
        });
        let names: Vec<&str> = spec.indicators.iter().map(|s| s.as_str()).collect();
        IndicatorMatrix::from_data(&names, z * l.transpose())
    }

    /// Log-density of one observation under N(x̄, Σ(θ)).
    fn loglik(spec: &SemSpec, v: &[f64], dev: &DVector<f64>) -> f64 {
        let sigma = implied_covariance(spec, &ModelParams::from_vec(spec, v));
        let chol = Cholesky::new(sigma).unwrap();
        let ld = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * (ld + dev.dot(&chol.solve(dev)))
    }

    #[test]
    fn sandwich_matches_numerical_oracle() {
        let (spec, truth) = small_model();
        let data = sample(&spec, &truth, 300, 7, true);
        let est = fit_ml(&data, &spec, &FitOptions::default()).unwrap();
        let se = robust_se(&est, &data).unwrap();

        let theta = est.params.to_vec(&spec);
        let q = theta.len();
        let p = spec.n_observed();
        let h = 1e-6;
        let w = Cholesky::new(est.implied.clone()).unwrap().inverse();

        // Δ by finite differences and the Kronecker form of the information.
        let mut delta = DMatrix::zeros(p * p, q);
        for r in 0..q {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[r] += h;
            dn[r] -= h;
            let d = (implied_covariance(&spec, &ModelParams::from_vec(&spec, &up))
                - implied_covariance(&spec, &ModelParams::from_vec(&spec, &dn)))
                / (2.0 * h);
            delta.set_column(r, &DVector::from_column_slice(d.as_slice()));
        }
        let a = delta.transpose() * w.kronecker(&w) * &delta * (est.n as f64 / 2.0);
        let a_inv = a.try_inverse().unwrap();

        let means = data.data.row_mean();
        let mut b = DMatrix::zeros(q, q);
        for i in 0..data.nrows() {
            let dev = (data.data.row(i) - &means).transpose();
            let s = DVector::from_fn(q, |r, _| {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[r] += h;
                dn[r] -= h;
                (loglik(&spec, &up, &dev) - loglik(&spec, &dn, &dev)) / (2.0 * h)
            });
            b += &s * s.transpose();
        }
        let oracle = &a_inv * b * &a_inv;
        for r in 0..q {
            let want = oracle[(r, r)].sqrt();
            assert!((se.params[r].se_robust - want).abs() < 1e-4 * want, "{}: {} vs {want}", se.params[r].label, se.params[r].se_robust);
            assert!((se.params[r].se_naive - a_inv[(r, r)].sqrt()).abs() < 1e-4 * want);
        }
    }

    #[test]
    fn robust_close_to_naive_under_normality() {
        let (spec, truth) = small_model();
        let data = sample(&spec, &truth, 20_000, 11, false);
        let est = fit_ml(&data, &spec, &FitOptions::default()).unwrap();
        let se = robust_se(&est, &data).unwrap();
        for row in &se.params {
            let ratio = row.se_robust / row.se_naive;
            assert!((0.9..1.1).contains(&ratio), "{}: {ratio}", row.label);
        }
    }

    #[test]
    fn unidentified_model_has_singular_information() {
        let spec = SemSpec { latents: vec!["F".into()], indicators: vec!["a".into(), "b".into()], assignment: vec![0, 0] };
        let truth = ModelParams { loadings: vec![0.8, 0.6], residuals: vec![0.36, 0.64], psi: DMatrix::identity(1, 1) };
        let data = sample(&spec, &truth, 200, 3, false);
        let est = fit_ml(&data, &spec, &FitOptions::default()).unwrap();
        assert_eq!(robust_se(&est, &data).unwrap_err(), SemError::SingularInformation);
    }
}
