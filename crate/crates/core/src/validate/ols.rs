use super::{stars, Coefficient, Design, Result, ValidateError};
use crate::stats::two_sided_t_p;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    Classical,
    /// HC1: White sandwich scaled by n/(n − k).
    Robust,
    /// Scores summed within clusters, scaled by G/(G−1)·(n−1)/(n−k).
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsResult {
    pub coefficients: Vec<Coefficient>,
    pub se_kind: SeKind,
    pub clusters: Option<usize>,
    pub n: usize,
    pub k: usize,
    pub r2: f64,
    /// Degrees of freedom behind the p-values.
    pub dof: f64,
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl OlsResult {
    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub fn ols_fit(y: &[f64], design: &Design, se_kind: SeKind, clusters: Option<&[String]>) -> Result<OlsResult> {
    let x = &design.x;
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(ValidateError::LengthMismatch { what: "outcome", expected: n, got: y.len() });
    }
    if n <= k {
        return Err(ValidateError::RankDeficient { n, k });
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(ValidateError::RankDeficient { n, k });
    }
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let inv_s = svd.singular_values.map(|s| 1.0 / s);
    let yv = DVector::from_column_slice(y);
    let beta = v_t.transpose() * DMatrix::from_diagonal(&inv_s) * (u.transpose() * &yv);
    let bread = v_t.transpose() * DMatrix::from_diagonal(&inv_s.map(|s| s * s)) * v_t;
    let resid = &yv - x * &beta;

    let nf = n as f64;
    let kf = k as f64;
    let (covariance, n_clusters, dof) = match se_kind {
        SeKind::Classical => {
            let s2 = resid.norm_squared() / (nf - kf);
            (&bread * s2, None, nf - kf)
        }
        SeKind::Robust => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let xi = x.row(i).transpose();
                meat.ger(resid[i] * resid[i], &xi, &xi, 1.0);
            }
            (&bread * meat * &bread * (nf / (nf - kf)), None, nf - kf)
        }
        SeKind::Cluster => {
            let keys = clusters.ok_or(ValidateError::MissingClusters)?;
            if keys.len() != n {
                return Err(ValidateError::LengthMismatch { what: "cluster key", expected: n, got: keys.len() });
            }
            let mut sums: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
            for i in 0..n {
                let score = x.row(i).transpose() * resid[i];
                *sums.entry(keys[i].as_str()).or_insert_with(|| DVector::zeros(k)) += score;
            }
            let g = sums.len();
            if g < 2 {
                return Err(ValidateError::TooFewClusters(g));
            }
            let mut meat = DMatrix::zeros(k, k);
            for s in sums.values() {
                meat.ger(1.0, s, s, 1.0);
            }
            let gf = g as f64;
            let factor = gf / (gf - 1.0) * (nf - 1.0) / (nf - kf);
            (&bread * meat * &bread * factor, Some(g), gf - 1.0)
        }
    };

    let y_mean = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r2 = 1.0 - resid.norm_squared() / sst;

    let coefficients = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = covariance[(j, j)].max(0.0).sqrt();
            let statistic = beta[j] / se;
            let p = two_sided_t_p(statistic, dof);
            Coefficient { name: name.clone(), estimate: beta[j], se, statistic, p, stars: stars(p).to_string() }
        })
        .collect();
    Ok(OlsResult {
        coefficients,
        se_kind,
        clusters: n_clusters,
        n,
        k,
        r2,
        dof,
        covariance,
        residuals: resid.iter().copied().collect(),
    })
}
