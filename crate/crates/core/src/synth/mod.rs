//! Synthetic data with known generating parameters, used as the oracle for
//! every estimation stage.

mod couples;
mod diary_fill;
mod treatment;

pub use couples::{
    simulate_couple_dataset, simulate_couples, write_bundle, CoupleParams, CoupleTruth, RespondentTruth,
    SimulatedCouples, Truth, CLIP_WARNING, DIARY_FILE, SURVEY_FILE, TAXONOMY_FILE, TRUTH_FILE,
};
pub use diary_fill::{feasible_units, split_units};
pub use treatment::{simulate_treatment, TreatmentDesign, TreatmentSample};

use crate::derive::{IndicatorMatrix, CHILDCARE_GAP, CHORES_GAP};
use crate::ingest::keys;
use crate::sem::{implied_covariance, ModelParams, SemSpec, LATENT_GENDER_GAP, LATENT_JUSTIFICATION, LATENT_MASCULINITY};
use crate::stats::sorted_symmetric_eigen;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("latent correlation matrix is not positive definite")]
    NonPdPsi,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("respondent {respondent_id}: {what} target of {hours} h/week cannot be written into a diary")]
    InfeasibleTarget { respondent_id: String, what: String, hours: f64 },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    pub name: String,
    pub latent: String,
    pub loading: f64,
    pub residual_variance: f64,
    pub mean: f64,
    /// Values outside `[lo, hi]` are clamped.
    #[serde(default)]
    pub clip: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCorrelation {
    pub a: String,
    pub b: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_couples: usize,
    pub latents: Vec<String>,
    pub indicators: Vec<IndicatorParams>,
    /// Unlisted pairs are uncorrelated.
    pub latent_correlations: Vec<LatentCorrelation>,
    #[serde(default)]
    pub couples: CoupleParams,
}

/// Table-style measurement parameters: loading, residual variance.
const MEASUREMENT: [(&str, &str, f64, f64); 11] = [
    (keys::SERIOUSNESS, LATENT_JUSTIFICATION, 13.33, 313.2175),
    (keys::VICTIM_BLAMING, LATENT_JUSTIFICATION, 13.99, 444.1522),
    (keys::PERPETRATOR_ACCOUNTABILITY, LATENT_JUSTIFICATION, 15.05, 282.3679),
    (keys::JUSTIFICATION, LATENT_JUSTIFICATION, 8.82, 370.9378),
    (keys::EMOTIONAL_STRENGTH, LATENT_MASCULINITY, 15.503, 282.7404),
    (keys::DRINKING, LATENT_MASCULINITY, 14.31, 618.6326),
    (keys::MINIMIZATION_OF_HARASSMENT, LATENT_MASCULINITY, 12.54, 577.8164),
    (keys::PHYSICAL_STRENGTH, LATENT_MASCULINITY, 13.746, 862.8163),
    (keys::EMOTIONAL_TOUGHNESS, LATENT_MASCULINITY, 15.49, 263.7377),
    (CHORES_GAP, LATENT_GENDER_GAP, 1.02, 82.3329),
    (CHILDCARE_GAP, LATENT_GENDER_GAP, 1.14, 15.11309),
];

/// Mean and total variance of the gap indicators in the diary preset.
const GAP_MEAN: f64 = 0.8;
const GAP_VARIANCE: f64 = 0.09;

impl GeneratorSpec {
    /// Published measurement parameters, all indicator means at mid-scale, no
    /// clipping. `n_couples` is left at zero: set it, or pass `n` to
    /// [`simulate_indicators`].
    pub fn paper_defaults() -> Self {
        GeneratorSpec {
            seed: 20240601,
            n_couples: 0,
            latents: vec![LATENT_JUSTIFICATION.into(), LATENT_MASCULINITY.into(), LATENT_GENDER_GAP.into()],
            indicators: MEASUREMENT
                .iter()
                .map(|&(name, latent, loading, residual)| IndicatorParams {
                    name: name.into(),
                    latent: latent.into(),
                    loading,
                    residual_variance: residual,
                    mean: 50.0,
                    clip: None,
                })
                .collect(),
            latent_correlations: vec![
                LatentCorrelation { a: LATENT_MASCULINITY.into(), b: LATENT_JUSTIFICATION.into(), value: 0.799 },
                LatentCorrelation { a: LATENT_MASCULINITY.into(), b: LATENT_GENDER_GAP.into(), value: -0.170 },
                LatentCorrelation { a: LATENT_JUSTIFICATION.into(), b: LATENT_GENDER_GAP.into(), value: 0.0 },
            ],
            couples: CoupleParams::default(),
        }
    }

    /// Variant that can be written out as diaries: survey items clipped to
    /// the 0–100 response scale, gap indicators rescaled to a feasible
    /// relative-difference range with the standardized loadings preserved.
    pub fn couple_defaults(n_couples: usize) -> Self {
        let mut spec = Self::paper_defaults();
        spec.n_couples = n_couples;
        for ind in &mut spec.indicators {
            if ind.latent == LATENT_GENDER_GAP {
                let std_loading = ind.loading / (ind.loading.powi(2) + ind.residual_variance).sqrt();
                ind.loading = std_loading * GAP_VARIANCE.sqrt();
                ind.residual_variance = GAP_VARIANCE - ind.loading.powi(2);
                ind.mean = GAP_MEAN;
                ind.clip = Some((-0.9, 3.0));
            } else {
                ind.clip = Some((0.0, 100.0));
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        for ind in &self.indicators {
            if !self.latents.contains(&ind.latent) {
                return Err(SynthError::InvalidSpec(format!("indicator {} loads on unknown latent {}", ind.name, ind.latent)));
            }
            if !(ind.residual_variance > 0.0) {
                return Err(SynthError::InvalidSpec(format!("residual variance of {} must be positive", ind.name)));
            }
            if let Some((lo, hi)) = ind.clip {
                if !(lo < hi) {
                    return Err(SynthError::InvalidSpec(format!("empty clip range for {}", ind.name)));
                }
            }
        }
        for c in &self.latent_correlations {
            for l in [&c.a, &c.b] {
                if !self.latents.contains(l) {
                    return Err(SynthError::InvalidSpec(format!("unknown latent {l} in correlations")));
                }
            }
        }
        Cholesky::new(self.psi()).ok_or(SynthError::NonPdPsi)?;
        Ok(())
    }

    pub fn latent_index(&self, name: &str) -> Option<usize> {
        self.latents.iter().position(|l| l == name)
    }

    pub fn psi(&self) -> DMatrix<f64> {
        let m = self.latents.len();
        let mut psi = DMatrix::identity(m, m);
        for c in &self.latent_correlations {
            if let (Some(a), Some(b)) = (self.latent_index(&c.a), self.latent_index(&c.b)) {
                psi[(a, b)] = c.value;
                psi[(b, a)] = c.value;
            }
        }
        psi
    }

    pub fn sem_spec(&self) -> SemSpec {
        SemSpec {
            latents: self.latents.clone(),
            indicators: self.indicators.iter().map(|i| i.name.clone()).collect(),
            assignment: self.indicators.iter().map(|i| self.latent_index(&i.latent).unwrap_or(0)).collect(),
        }
    }

    /// Generating values in the SEM's parameterization.
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            loadings: self.indicators.iter().map(|i| i.loading).collect(),
            residuals: self.indicators.iter().map(|i| i.residual_variance).collect(),
            psi: self.psi(),
        }
    }

    pub fn population_covariance(&self) -> DMatrix<f64> {
        implied_covariance(&self.sem_spec(), &self.model_params())
    }

    pub fn means(&self) -> DVector<f64> {
        DVector::from_iterator(self.indicators.len(), self.indicators.iter().map(|i| i.mean))
    }
}

/// RNG for one unit of work: the master seed selects the key, the unit
/// index selects the stream, so results do not depend on scheduling.
pub(crate) fn unit_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedIndicators {
    pub matrix: IndicatorMatrix,
    /// True latent values, one column per latent.
    pub latents: DMatrix<f64>,
    /// Share of clipped values among indicators that have a clip range.
    pub clip_fraction: f64,
}

/// Draw `n` independent respondents from the measurement model.
pub fn simulate_indicators(spec: &GeneratorSpec, n: usize) -> Result<SimulatedIndicators> {
    spec.validate()?;
    let psi_l = Cholesky::new(spec.psi()).ok_or(SynthError::NonPdPsi)?.l();
    let m = spec.latents.len();
    let p = spec.indicators.len();
    let assignment = spec.sem_spec().assignment;

    let rows: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = unit_rng(spec.seed, i as u64);
            let z = DVector::from_fn(m, |_, _| normal(&mut rng));
            let eta = &psi_l * z;
            let mut clipped = 0;
            let x = spec
                .indicators
                .iter()
                .zip(&assignment)
                .map(|(ind, &a)| {
                    let v = ind.mean + ind.loading * eta[a] + ind.residual_variance.sqrt() * normal(&mut rng);
                    clip(v, ind.clip, &mut clipped)
                })
                .collect();
            (x, eta.iter().copied().collect(), clipped)
        })
        .collect();

    let data = DMatrix::from_fn(n, p, |i, j| rows[i].0[j]);
    let latents = DMatrix::from_fn(n, m, |i, j| rows[i].1[j]);
    let clipped: usize = rows.iter().map(|r| r.2).sum();
    let clippable = spec.indicators.iter().filter(|i| i.clip.is_some()).count() * n;
    let names = spec.indicators.iter().map(|i| i.name.clone()).collect();
    let ids = (0..n).map(|i| format!("r{i:06}")).collect();
    Ok(SimulatedIndicators {
        matrix: IndicatorMatrix::new(names, ids, data),
        latents,
        clip_fraction: if clippable == 0 { 0.0 } else { clipped as f64 / clippable as f64 },
    })
}

pub(crate) fn clip(v: f64, range: Option<(f64, f64)>, clipped: &mut usize) -> f64 {
    match range {
        Some((lo, hi)) if v < lo || v > hi => {
            *clipped += 1;
            v.clamp(lo, hi)
        }
        _ => v,
    }
}

/// The composite index computed with population quantities: regression
/// factor-score weights from the generating model, population standard
/// deviations, and the leading eigenvector of the implied score correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationIndex {
    pub means: Vec<f64>,
    /// `p × m` factor-score weights, row-major by indicator.
    pub weights: Vec<Vec<f64>>,
    pub score_sd: Vec<f64>,
    pub reverse: Vec<bool>,
    pub phi: Vec<f64>,
}

impl PopulationIndex {
    pub fn new(spec: &GeneratorSpec, reversed_latent: &str) -> Self {
        let sem = spec.sem_spec();
        let params = spec.model_params();
        let sigma = implied_covariance(&sem, &params);
        let w = Cholesky::new(sigma.clone()).expect("validated spec").inverse() * params.lambda(&sem) * &params.psi;
        let score_cov = w.transpose() * &sigma * &w;
        let m = spec.latents.len();
        let sd: Vec<f64> = (0..m).map(|j| score_cov[(j, j)].sqrt()).collect();
        let reverse: Vec<bool> = spec.latents.iter().map(|l| l == reversed_latent).collect();
        let sign = |j: usize| if reverse[j] { -1.0 } else { 1.0 };
        let corr = DMatrix::from_fn(m, m, |a, b| sign(a) * sign(b) * score_cov[(a, b)] / (sd[a] * sd[b]));
        let (_, vectors) = sorted_symmetric_eigen(&corr);
        let mut phi: Vec<f64> = vectors.column(0).iter().copied().collect();
        if phi[0] < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        PopulationIndex {
            means: spec.indicators.iter().map(|i| i.mean).collect(),
            weights: (0..w.nrows()).map(|k| w.row(k).iter().copied().collect()).collect(),
            score_sd: sd,
            reverse,
            phi,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        (0..self.phi.len())
            .map(|j| {
                let s: f64 = x.iter().zip(&self.means).zip(&self.weights).map(|((v, mu), w)| (v - mu) * w[j]).sum();
                let z = s / self.score_sd[j];
                self.phi[j] * if self.reverse[j] { -z } else { z }
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, variance};

    #[test]
    fn defaults_are_valid_and_consistent() {
        let spec = GeneratorSpec::paper_defaults();
        spec.validate().unwrap();
        let fitted = spec.population_covariance();
        let k = spec.indicators.iter().position(|i| i.name == keys::PHYSICAL_STRENGTH).unwrap();
        assert!((fitted[(k, k)] - 1051.792).abs() < 0.05);
        GeneratorSpec::couple_defaults(10).validate().unwrap();
    }

    #[test]
    fn couple_preset_keeps_standardized_loadings() {
        let a = GeneratorSpec::paper_defaults();
        let b = GeneratorSpec::couple_defaults(1);
        for (x, y) in a.indicators.iter().zip(&b.indicators) {
            let sx = x.loading / (x.loading.powi(2) + x.residual_variance).sqrt();
            let sy = y.loading / (y.loading.powi(2) + y.residual_variance).sqrt();
            assert!((sx - sy).abs() < 1e-12);
        }
    }

    #[test]
    fn non_pd_psi_rejected() {
        let mut spec = GeneratorSpec::paper_defaults();
        spec.latent_correlations[2].value = -0.9;
        assert!(matches!(spec.validate(), Err(SynthError::NonPdPsi)));
    }

    #[test]
    fn variance_matches_fitted_value() {
        let spec = GeneratorSpec::paper_defaults();
        let sim = simulate_indicators(&spec, 100_000).unwrap();
        let col = sim.matrix.column_index(keys::PHYSICAL_STRENGTH).unwrap();
        let v = variance(&sim.matrix.data.column(col).iter().copied().collect::<Vec<_>>());
        assert!((v / 1051.792 - 1.0).abs() < 0.02, "variance {v}");
        assert_eq!(sim.clip_fraction, 0.0);
    }

    #[test]
    fn noiseless_limit() {
        let mut spec = GeneratorSpec::paper_defaults();
        spec.indicators.iter_mut().for_each(|i| i.residual_variance = 1e-10);
        let sim = simulate_indicators(&spec, 2000).unwrap();
        let col = |j: usize| sim.matrix.data.column(j).iter().copied().collect::<Vec<_>>();
        assert!(correlation(&col(0), &col(1)) > 0.999_999);
    }

    #[test]
    fn deterministic() {
        let spec = GeneratorSpec::couple_defaults(0);
        let a = simulate_indicators(&spec, 500).unwrap();
        let b = simulate_indicators(&spec, 500).unwrap();
        assert_eq!(a, b);
        assert!(a.clip_fraction > 0.0 && a.clip_fraction < 0.05);
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(simulate_indicators(&other, 500).unwrap().matrix.data, a.matrix.data);
    }

    #[test]
    fn population_index_tracks_reversed_gap() {
        let spec = GeneratorSpec::paper_defaults();
        let idx = PopulationIndex::new(&spec, LATENT_GENDER_GAP);
        assert!((idx.phi.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(idx.phi[0] > 0.0 && idx.phi[1] > 0.0);
        assert_eq!(idx.score(&idx.means), 0.0);
    }
}
