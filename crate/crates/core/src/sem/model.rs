use super::{Result, SemError, SemSpec};
use nalgebra::{Cholesky, DMatrix, Dyn};

const RESIDUAL_FLOOR: f64 = 1e-8;
const CORR_BOUND: f64 = 1.0 - 1e-8;

/// Free parameters in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub loadings: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Latent covariance with unit diagonal.
    pub psi: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Loading(usize),
    Residual(usize),
    LatentCov(usize, usize),
}

impl ParamKind {
    /// Parameter order shared by every vector form.
    pub fn all(spec: &SemSpec) -> Vec<ParamKind> {
        let p = spec.n_observed();
        let mut out: Vec<ParamKind> = (0..p).map(ParamKind::Loading).collect();
        out.extend((0..p).map(ParamKind::Residual));
        out.extend(spec.latent_pairs().into_iter().map(|(a, b)| ParamKind::LatentCov(a, b)));
        out
    }

    pub fn label(&self, spec: &SemSpec) -> String {
        match *self {
            ParamKind::Loading(k) => format!("{} =~ {}", spec.latents[spec.assignment[k]], spec.indicators[k]),
            ParamKind::Residual(k) => format!("{} ~~ {}", spec.indicators[k], spec.indicators[k]),
            ParamKind::LatentCov(a, b) => format!("{} ~~ {}", spec.latents[b], spec.latents[a]),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp_m1()).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ModelParams {
    /// Half the sample sd as loadings, half the variance as residuals,
    /// uncorrelated latents.
    pub fn start_values(spec: &SemSpec, s: &DMatrix<f64>) -> Self {
        let p = spec.n_observed();
        ModelParams {
            loadings: (0..p).map(|k| 0.5 * s[(k, k)].sqrt()).collect(),
            residuals: (0..p).map(|k| 0.5 * s[(k, k)]).collect(),
            psi: DMatrix::identity(spec.n_latent(), spec.n_latent()),
        }
    }

    pub fn lambda(&self, spec: &SemSpec) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(spec.n_observed(), spec.n_latent());
        for (k, &a) in spec.assignment.iter().enumerate() {
            l[(k, a)] = self.loadings[k];
        }
        l
    }

    pub fn to_vec(&self, spec: &SemSpec) -> Vec<f64> {
        let mut v = self.loadings.clone();
        v.extend_from_slice(&self.residuals);
        v.extend(spec.latent_pairs().into_iter().map(|(a, b)| self.psi[(a, b)]));
        v
    }

    pub fn from_vec(spec: &SemSpec, v: &[f64]) -> Self {
        let p = spec.n_observed();
        let m = spec.n_latent();
        let mut psi = DMatrix::identity(m, m);
        for (i, (a, b)) in spec.latent_pairs().into_iter().enumerate() {
            psi[(a, b)] = v[2 * p + i];
            psi[(b, a)] = v[2 * p + i];
        }
        ModelParams { loadings: v[..p].to_vec(), residuals: v[p..2 * p].to_vec(), psi }
    }

    /// Softplus keeps residual variances positive; tanh keeps latent
    /// correlations inside (-1, 1).
    pub(crate) fn to_unconstrained(&self, spec: &SemSpec) -> Vec<f64> {
        let p = spec.n_observed();
        let mut v = self.to_vec(spec);
        for x in &mut v[p..2 * p] {
            *x = softplus_inv((*x - RESIDUAL_FLOOR).max(1e-300));
        }
        for x in &mut v[2 * p..] {
            *x = (*x / CORR_BOUND).clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
        }
        v
    }

    pub(crate) fn from_unconstrained(spec: &SemSpec, u: &[f64]) -> Self {
        let p = spec.n_observed();
        let mut v = u.to_vec();
        for x in &mut v[p..2 * p] {
            *x = RESIDUAL_FLOOR + softplus(*x);
        }
        for x in &mut v[2 * p..] {
            *x = CORR_BOUND * x.tanh();
        }
        Self::from_vec(spec, &v)
    }

    /// Diagonal of d(natural)/d(unconstrained).
    pub(crate) fn transform_jacobian(spec: &SemSpec, u: &[f64]) -> Vec<f64> {
        let p = spec.n_observed();
        u.iter()
            .enumerate()
            .map(|(i, &x)| {
                if i < p {
                    1.0
                } else if i < 2 * p {
                    sigmoid(x)
                } else {
                    let t = x.tanh();
                    CORR_BOUND * (1.0 - t * t)
                }
            })
            .collect()
    }

    /// Flip each latent so its loadings sum to a non-negative value.
    pub(crate) fn normalize_signs(&mut self, spec: &SemSpec) {
        for a in 0..spec.n_latent() {
            let sum: f64 = spec.assignment.iter().zip(&self.loadings).filter(|(&f, _)| f == a).map(|(_, l)| l).sum();
            if sum < 0.0 {
                for (k, &f) in spec.assignment.iter().enumerate() {
                    if f == a {
                        self.loadings[k] = -self.loadings[k];
                    }
                }
                for b in 0..spec.n_latent() {
                    if b != a {
                        self.psi[(a, b)] = -self.psi[(a, b)];
                        self.psi[(b, a)] = -self.psi[(b, a)];
                    }
                }
            }
        }
    }
}

/// `Λ Ψ Λᵀ + Θ`.
pub fn implied_covariance(spec: &SemSpec, params: &ModelParams) -> DMatrix<f64> {
    let l = params.lambda(spec);
    let mut sigma = &l * &params.psi * l.transpose();
    for (k, e) in params.residuals.iter().enumerate() {
        sigma[(k, k)] += e;
    }
    sigma
}

/// `F = ln|Σ| + tr(S Σ⁻¹) − ln|S| − p` for a fixed sample covariance.
#[derive(Debug, Clone)]
pub struct MlObjective {
    pub spec: SemSpec,
    pub s: DMatrix<f64>,
    ln_det_s: f64,
}

fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

impl MlObjective {
    pub fn new(spec: SemSpec, s: DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        if s.nrows() != spec.n_observed() || s.ncols() != spec.n_observed() {
            return Err(SemError::InvalidSpec(format!(
                "covariance is {}x{}, model has {} indicators",
                s.nrows(),
                s.ncols(),
                spec.n_observed()
            )));
        }
        let chol = Cholesky::new(s.clone()).ok_or(SemError::NonPositiveDefiniteS)?;
        let ln_det_s = ln_det(&chol);
        Ok(MlObjective { spec, s, ln_det_s })
    }

    /// `None` when Σ(θ) is not positive definite.
    pub fn value(&self, params: &ModelParams) -> Option<f64> {
        let sigma = implied_covariance(&self.spec, params);
        let chol = Cholesky::new(sigma)?;
        let sigma_inv = chol.inverse();
        let tr = (&self.s * &sigma_inv).trace();
        Some(ln_det(&chol) + tr - self.ln_det_s - self.spec.n_observed() as f64)
    }

    /// Analytic gradient in natural parameter order.
    pub fn gradient(&self, params: &ModelParams) -> Option<Vec<f64>> {
        let sigma = implied_covariance(&self.spec, params);
        let w = Cholesky::new(sigma.clone())?.inverse();
        let m = &w * (&sigma - &self.s) * &w;
        let l = params.lambda(&self.spec);
        let mlp = &m * &l * &params.psi;
        let ltml = l.transpose() * &m * &l;
        let p = self.spec.n_observed();
        let mut g = Vec::with_capacity(self.spec.n_free());
        g.extend((0..p).map(|k| 2.0 * mlp[(k, self.spec.assignment[k])]));
        g.extend((0..p).map(|k| m[(k, k)]));
        g.extend(self.spec.latent_pairs().into_iter().map(|(a, b)| 2.0 * ltml[(a, b)]));
        Some(g)
    }

    /// `∂Σ/∂θ_r` for every free parameter.
    pub fn sigma_derivatives(&self, params: &ModelParams) -> Vec<DMatrix<f64>> {
        sigma_derivatives(&self.spec, params)
    }

    /// Expected Hessian of F: entries `tr(Σ⁻¹ Dr Σ⁻¹ Ds)`.
    pub fn information(&self, params: &ModelParams) -> Option<DMatrix<f64>> {
        let sigma = implied_covariance(&self.spec, params);
        let w = Cholesky::new(sigma)?.inverse();
        Some(expected_information(&w, &sigma_derivatives(&self.spec, params)))
    }
}

pub(crate) fn sigma_derivatives(spec: &SemSpec, params: &ModelParams) -> Vec<DMatrix<f64>> {
    let p = spec.n_observed();
    let l = params.lambda(spec);
    let lp = &l * &params.psi;
    ParamKind::all(spec)
        .into_iter()
        .map(|kind| {
            let mut d = DMatrix::zeros(p, p);
            match kind {
                ParamKind::Loading(k) => {
                    let f = spec.assignment[k];
                    for j in 0..p {
                        d[(k, j)] += lp[(j, f)];
                        d[(j, k)] += lp[(j, f)];
                    }
                }
                ParamKind::Residual(k) => d[(k, k)] = 1.0,
                ParamKind::LatentCov(a, b) => {
                    for i in 0..p {
                        for j in 0..p {
                            d[(i, j)] = l[(i, a)] * l[(j, b)] + l[(i, b)] * l[(j, a)];
                        }
                    }
                }
            }
            d
        })
        .collect()
}

pub(crate) fn expected_information(w: &DMatrix<f64>, derivs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let a: Vec<DMatrix<f64>> = derivs.iter().map(|d| w * d).collect();
    let q = a.len();
    let mut info = DMatrix::zeros(q, q);
    for r in 0..q {
        for s in 0..=r {
            let v = a[r].component_mul(&a[s].transpose()).sum();
            info[(r, s)] = v;
            info[(s, r)] = v;
        }
    }
    info
}
