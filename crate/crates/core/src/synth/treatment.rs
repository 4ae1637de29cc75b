use super::{normal, unit_rng};
use crate::stats::normal_quantile;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Two-arm randomized design with a binary outcome from a probit model.
/// The arm shifts the outcome probability from `baseline_rate` to
/// `baseline_rate + effect`, so the true average marginal effect is `effect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDesign {
    pub n: usize,
    pub baseline_rate: f64,
    pub effect: f64,
    /// Probability of assignment to the treated arm.
    pub treated_share: f64,
    pub seed: u64,
}

impl Default for TreatmentDesign {
    fn default() -> Self {
        TreatmentDesign { n: 1060, baseline_rate: 0.5, effect: -0.05, treated_share: 0.5, seed: 20240601 }
    }
}

impl TreatmentDesign {
    /// Probit intercept and treatment coefficient.
    pub fn coefficients(&self) -> (f64, f64) {
        let alpha = normal_quantile(self.baseline_rate);
        (alpha, normal_quantile(self.baseline_rate + self.effect) - alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentSample {
    pub treated: Vec<f64>,
    pub outcome: Vec<f64>,
}

pub fn simulate_treatment(design: &TreatmentDesign) -> TreatmentSample {
    let (alpha, beta) = design.coefficients();
    let mut rng = unit_rng(design.seed, 0);
    let mut treated = Vec::with_capacity(design.n);
    let mut outcome = Vec::with_capacity(design.n);
    for _ in 0..design.n {
        let t = if rng.random_bool(design.treated_share) { 1.0 } else { 0.0 };
        let latent = alpha + beta * t + normal(&mut rng);
        treated.push(t);
        outcome.push(if latent > 0.0 { 1.0 } else { 0.0 });
    }
    TreatmentSample { treated, outcome }
}
