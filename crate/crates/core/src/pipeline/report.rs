//! Stage report structures and their JSON/CSV serialization.

use crate::composite::{CompositeModel, IndexDistribution, ReliabilityReport};
use crate::factor::ParallelAnalysisResult;
use crate::ingest::Exclusion;
use crate::sem::{FitStats, ParamInference};
use crate::validate::{Coefficient, OlsResult, ProbitResult, SeKind, SubgroupResult};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const INGEST_REPORT: &str = "ingest.json";
pub const DERIVE_REPORT: &str = "derive.json";
pub const FACTOR_REPORT: &str = "factor.json";
pub const SEM_REPORT: &str = "sem.json";
pub const COMPOSITE_REPORT: &str = "composite.json";
pub const VALIDATE_REPORT: &str = "validate.json";
pub const ERROR_MANIFEST: &str = "errors.json";

pub const SEM_LOADINGS_HEADER: [&str; 7] =
    ["Observed Variable", "Latent Factor", "Unstd. Coeff.", "Std. Coeff.", "Std. Err.", "z", "p"];
pub const SEM_FIT_HEADER: [&str; 7] =
    ["Observed Variable", "Fitted", "Predicted", "Residual", "R-squared", "mc", "mc2"];
pub const SEM_LATENT_HEADER: [&str; 6] = ["Latent Factor", "Latent Factor", "Covariance", "Std. Err.", "z", "p"];
pub const OLS_HEADER: [&str; 13] =
    ["table", "outcome", "sample", "se_kind", "n", "r2", "term", "estimate", "se", "statistic", "p", "stars", "error"];
pub const SUBGROUP_HEADER: [&str; 12] =
    ["table", "split", "group", "n", "term", "estimate", "se", "statistic", "p", "stars", "clusters", "error"];
pub const PROBIT_HEADER: [&str; 11] =
    ["name", "focal", "n", "threshold", "ame", "se", "z", "p", "ci_low", "ci_high", "error"];

/// Four decimals; empty for missing or non-finite values.
pub fn fmt4(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => {
            let s = format!("{x:.4}");
            if s == "-0.0000" {
                "0.0000".into()
            } else {
                s
            }
        }
        _ => String::new(),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {message}")]
pub struct IoFailure {
    pub path: PathBuf,
    pub message: String,
}

pub type ReportResult = std::result::Result<PathBuf, IoFailure>;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> IoFailure {
    IoFailure { path: path.to_path_buf(), message: e.to_string() }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> ReportResult {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_failure(&path, e))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

/// CSV with the header always written, so an empty table is still valid.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> ReportResult {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header).map_err(|e| io_failure(&path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_failure(&path, e))?;
    }
    w.flush().map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

/// Writes a file through a closure producing its bytes.
pub fn write_with<F>(dir: &Path, name: &str, f: F) -> ReportResult
where
    F: FnOnce(&mut Vec<u8>) -> std::result::Result<(), String>,
{
    let path = dir.join(name);
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_failure(&path, e))?;
    std::fs::File::create(&path).and_then(|mut file| file.write_all(&buf)).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub survey_rows: usize,
    pub diary_days: usize,
    pub taxonomy_codes: usize,
    pub couples: usize,
    pub matched_respondents: usize,
    pub exclusion_counts: BTreeMap<String, usize>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeriveReport {
    pub respondents: usize,
    pub couples: usize,
    pub undefined_gap_couples: usize,
    pub missing_gender_norms: usize,
    pub indicators: Vec<String>,
    pub complete_indicator_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorReport {
    pub indicators: Vec<String>,
    pub dropped: usize,
    #[serde(flatten)]
    pub analysis: ParallelAnalysisResult,
}

/// One measurement equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadingRow {
    pub observed_variable: String,
    pub latent_factor: String,
    pub unstandardized: f64,
    pub standardized: f64,
    pub se: Option<f64>,
    pub se_naive: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentCovarianceRow {
    pub a: String,
    pub b: String,
    pub covariance: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemReport {
    pub n: usize,
    pub dropped: usize,
    pub fmin: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub heywood: Vec<String>,
    pub heywood_warning: bool,
    pub loadings: Vec<LoadingRow>,
    pub latent_covariances: Vec<LatentCovarianceRow>,
    pub fit: FitStats,
    /// Every free parameter with naive and sandwich errors.
    pub parameters: Vec<ParamInference>,
    /// Set when the standard errors could not be computed.
    pub se_error: Option<String>,
    pub factor_scores_skipped: usize,
}

impl SemReport {
    pub fn loadings_rows(&self) -> Vec<Vec<String>> {
        self.loadings
            .iter()
            .map(|r| {
                vec![
                    r.observed_variable.clone(),
                    r.latent_factor.clone(),
                    fmt4(Some(r.unstandardized)),
                    fmt4(Some(r.standardized)),
                    fmt4(r.se),
                    fmt4(r.z),
                    fmt4(r.p),
                ]
            })
            .collect()
    }

    pub fn fit_rows(&self) -> Vec<Vec<String>> {
        self.fit
            .indicators
            .iter()
            .map(|r| {
                vec![
                    r.indicator.clone(),
                    fmt4(Some(r.fitted)),
                    fmt4(Some(r.predicted)),
                    fmt4(Some(r.residual)),
                    fmt4(Some(r.r2)),
                    fmt4(Some(r.mc)),
                    fmt4(Some(r.mc2)),
                ]
            })
            .collect()
    }

    pub fn latent_rows(&self) -> Vec<Vec<String>> {
        self.latent_covariances
            .iter()
            .map(|r| vec![r.a.clone(), r.b.clone(), fmt4(Some(r.covariance)), fmt4(r.se), fmt4(r.z), fmt4(r.p)])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeReport {
    pub model: CompositeModel,
    pub reliability: ReliabilityReport,
    pub distribution: IndexDistribution,
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsModelReport {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub result: Option<OlsResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsTableReport {
    pub name: String,
    pub sample: super::Sample,
    pub se_kind: SeKind,
    pub models: Vec<OlsModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupTableReport {
    pub name: String,
    pub outcome: String,
    pub regressors: Vec<String>,
    pub groups: Vec<SubgroupResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitReport {
    pub name: String,
    pub focal: String,
    pub covariates: Vec<String>,
    /// Cut applied to the outcome within the sample.
    pub threshold: Option<f64>,
    pub share_above: Option<f64>,
    pub result: Option<ProbitResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub ols: Vec<OlsTableReport>,
    pub subgroups: Vec<SubgroupTableReport>,
    pub probit: Vec<ProbitReport>,
}

fn coefficient_cells(c: &Coefficient) -> [String; 6] {
    [
        c.name.clone(),
        fmt4(Some(c.estimate)),
        fmt4(Some(c.se)),
        fmt4(Some(c.statistic)),
        fmt4(Some(c.p)),
        c.stars.to_string(),
    ]
}

impl ValidateReport {
    pub fn ols_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for t in &self.ols {
            let sample = serde_json::to_value(t.sample).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let se_kind =
                serde_json::to_value(t.se_kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            for m in &t.models {
                let lead = [t.name.clone(), m.outcome.clone(), sample.clone(), se_kind.clone()];
                match &m.result {
                    Some(r) => {
                        for c in &r.coefficients {
                            let mut row = lead.to_vec();
                            row.extend([r.n.to_string(), fmt4(Some(r.r2))]);
                            row.extend(coefficient_cells(c));
                            row.push(String::new());
                            rows.push(row);
                        }
                    }
                    None => {
                        let mut row = lead.to_vec();
                        row.extend(std::iter::repeat_n(String::new(), 8));
                        row.push(m.error.clone().unwrap_or_default());
                        rows.push(row);
                    }
                }
            }
        }
        rows
    }

    pub fn subgroup_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for t in &self.subgroups {
            for g in &t.groups {
                let lead = [t.name.clone(), g.split.clone(), g.group.clone(), g.n.to_string()];
                match &g.estimate {
                    Some(r) => {
                        for c in &r.coefficients {
                            let mut row = lead.to_vec();
                            row.extend(coefficient_cells(c));
                            row.push(r.clusters.map(|c| c.to_string()).unwrap_or_default());
                            row.push(String::new());
                            rows.push(row);
                        }
                    }
                    None => {
                        let mut row = lead.to_vec();
                        row.extend(std::iter::repeat_n(String::new(), 7));
                        row.push(g.error.clone().unwrap_or_default());
                        rows.push(row);
                    }
                }
            }
        }
        rows
    }

    pub fn probit_rows(&self) -> Vec<Vec<String>> {
        self.probit
            .iter()
            .map(|p| match &p.result {
                Some(r) => vec![
                    p.name.clone(),
                    p.focal.clone(),
                    r.n.to_string(),
                    fmt4(p.threshold),
                    fmt4(Some(r.ame)),
                    fmt4(Some(r.se)),
                    fmt4(Some(r.z)),
                    fmt4(Some(r.p)),
                    fmt4(Some(r.ci_low)),
                    fmt4(Some(r.ci_high)),
                    String::new(),
                ],
                None => {
                    let mut row = vec![p.name.clone(), p.focal.clone()];
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.push(p.error.clone().unwrap_or_default());
                    row
                }
            })
            .collect()
    }
}

/// Written when a stage fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorManifest {
    pub failed_stage: String,
    pub cause: String,
    pub completed_stages: Vec<String>,
}
