//! Batch orchestration: configuration, sequential stage execution and the
//! report bundle.
//!
//! Stages run in a fixed order (ingest, derive, factor, sem, composite,
//! validate). Each completed stage writes its JSON report, plus CSV tables
//! where useful, before the next one starts. When a stage fails the reports of
//! the completed stages are kept and `errors.json` records the failure.

mod config;
pub mod report;
mod variables;

pub use config::{
    InputPaths, ModelSpec, OlsTableSpec, PipelineConfig, ProbitSpec, RegressionSuite, Sample, SplitSpec,
    SubgroupTableSpec, OUTPUT_DIR_ENV, SCHEMA_VERSION,
};
pub use variables::{is_known_variable, known_variables, VariableTable, INDEX, PARTNER_PREFIX};

use crate::composite::{build_composite, cronbach_alpha, index_distribution};
use crate::derive::{
    derive_dataset, indicator_matrix, subgroup_split, write_couples_csv, write_respondents_csv, DerivedDataset,
    IndicatorMatrix, SplitRule,
};
use crate::factor::parallel_analysis;
use crate::ingest::{match_couples, parse_diary, parse_survey, Gender, MatchOutcome, Taxonomy};
use crate::sem::{factor_scores, fit_ml, fit_statistics, robust_se, FactorScores, FitOptions, ParamKind};
use crate::validate::{
    ols_fit, probit_ame, probit_fit, subgroup_regressions, Design, FocalKind, GroupSpec, SeKind, SubgroupResult,
};
use nalgebra::DMatrix;
use report::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Derive,
    Factor,
    Sem,
    Composite,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Ingest, Stage::Derive, Stage::Factor, Stage::Sem, Stage::Composite, Stage::Validate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Derive => "derive",
            Stage::Factor => "factor",
            Stage::Sem => "sem",
            Stage::Composite => "composite",
            Stage::Validate => "validate",
        }
    }

    /// The stage's JSON report.
    pub fn report_file(self) -> &'static str {
        match self {
            Stage::Ingest => INGEST_REPORT,
            Stage::Derive => DERIVE_REPORT,
            Stage::Factor => FACTOR_REPORT,
            Stage::Sem => SEM_REPORT,
            Stage::Composite => COMPOSITE_REPORT,
            Stage::Validate => VALIDATE_REPORT,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: Stage, cause: String },
}

impl PipelineError {
    /// 1 for configuration errors, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::ConfigInvalid(_) => 1,
            PipelineError::StageFailed { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
    /// Every file written, in order.
    pub files: Vec<PathBuf>,
}

type StageResult<T> = std::result::Result<T, String>;

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Run<'a> {
    out: &'a Path,
    completed: Vec<Stage>,
    files: Vec<PathBuf>,
}

impl Run<'_> {
    fn emit(&mut self, written: ReportResult) -> StageResult<()> {
        self.files.push(written.map_err(err)?);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> StageResult<()> {
        let written = write_json(self.out, name, value);
        self.emit(written)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> StageResult<()> {
        let written = write_csv(self.out, name, header, rows);
        self.emit(written)
    }
}

/// Validates the configuration, then runs every stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    config.check()?;
    let out = config.output_dir.as_path();
    std::fs::create_dir_all(out)
        .map_err(|e| PipelineError::ConfigInvalid(format!("cannot create output directory {}: {e}", out.display())))?;
    let stale = out.join(ERROR_MANIFEST);
    if stale.exists() {
        std::fs::remove_file(&stale)
            .map_err(|e| PipelineError::ConfigInvalid(format!("cannot remove {}: {e}", stale.display())))?;
    }
    let mut run = Run { out, completed: Vec::new(), files: Vec::new() };
    match execute(config, &mut run) {
        Ok(()) => Ok(RunSummary { output_dir: out.to_path_buf(), stages: run.completed, files: run.files }),
        Err((stage, cause)) => {
            let manifest = ErrorManifest {
                failed_stage: stage.as_str().to_string(),
                cause: cause.clone(),
                completed_stages: run.completed.iter().map(|s| s.as_str().to_string()).collect(),
            };
            // The stage failure is the error worth reporting even if the
            // manifest cannot be written.
            let _ = write_json(out, ERROR_MANIFEST, &manifest);
            Err(PipelineError::StageFailed { stage, cause })
        }
    }
}

fn execute(config: &PipelineConfig, run: &mut Run) -> Result<(), (Stage, String)> {
    fn at<T>(stage: Stage, r: StageResult<T>) -> Result<T, (Stage, String)> {
        r.map_err(|e| (stage, e))
    }
    let matched = at(Stage::Ingest, ingest_stage(config, run))?;
    run.completed.push(Stage::Ingest);
    let (dataset, matrix) = at(Stage::Derive, derive_stage(config, &matched, run))?;
    run.completed.push(Stage::Derive);
    at(Stage::Factor, factor_stage(config, &matrix, run))?;
    run.completed.push(Stage::Factor);
    let scores = at(Stage::Sem, sem_stage(config, &matrix, run))?;
    run.completed.push(Stage::Sem);
    let index = at(Stage::Composite, composite_stage(config, &scores, run))?;
    run.completed.push(Stage::Composite);
    at(Stage::Validate, validate_stage(config, &dataset, &index, run))?;
    run.completed.push(Stage::Validate);
    Ok(())
}

fn ingest_stage(config: &PipelineConfig, run: &mut Run) -> StageResult<MatchOutcome> {
    let taxonomy = Taxonomy::from_path(&config.inputs.taxonomy).map_err(err)?;
    let surveys = parse_survey(&config.inputs.survey, &config.items).map_err(err)?;
    let diaries = parse_diary(&config.inputs.diary, &taxonomy).map_err(err)?;
    let matched = match_couples(&surveys, &diaries);
    let mut exclusion_counts = BTreeMap::new();
    for e in &matched.excluded {
        let key = serde_json::to_value(e.reason).map_err(err)?.as_str().unwrap_or_default().to_string();
        *exclusion_counts.entry(key).or_insert(0) += 1;
    }
    let report = IngestReport {
        survey_rows: surveys.len(),
        diary_days: diaries.len(),
        taxonomy_codes: taxonomy.len(),
        couples: matched.couples.len(),
        matched_respondents: matched.matched_respondents(),
        exclusion_counts,
        exclusions: matched.excluded.clone(),
    };
    run.json(INGEST_REPORT, &report)?;
    if matched.couples.is_empty() {
        return Err("no complete couples after matching".into());
    }
    Ok(matched)
}

/// The configured SEM indicators, in model order.
fn model_indicators(config: &PipelineConfig, matrix: &IndicatorMatrix) -> StageResult<IndicatorMatrix> {
    let order: Option<Vec<usize>> = config.sem.indicators.iter().map(|n| matrix.column_index(n)).collect();
    order.map(|o| matrix.permute_columns(&o)).ok_or_else(|| "SEM indicators missing from derived data".into())
}

fn derive_stage(
    config: &PipelineConfig,
    matched: &MatchOutcome,
    run: &mut Run,
) -> StageResult<(DerivedDataset, IndicatorMatrix)> {
    let dataset = derive_dataset(&matched.couples).map_err(err)?;
    let matrix = model_indicators(config, &indicator_matrix(&dataset))?;
    let report = DeriveReport {
        respondents: dataset.respondents.len(),
        couples: dataset.couples.len(),
        undefined_gap_couples: dataset.undefined_gap_count(),
        missing_gender_norms: dataset.missing_norms_count(),
        indicators: matrix.names.clone(),
        complete_indicator_rows: matrix.complete_cases().0.nrows(),
    };
    run.json(DERIVE_REPORT, &report)?;
    let respondents = write_with(run.out, "respondents.csv", |buf| write_respondents_csv(buf, &dataset).map_err(err));
    run.emit(respondents)?;
    let couples = write_with(run.out, "couples.csv", |buf| write_couples_csv(buf, &dataset).map_err(err));
    run.emit(couples)?;
    Ok((dataset, matrix))
}

fn factor_stage(config: &PipelineConfig, matrix: &IndicatorMatrix, run: &mut Run) -> StageResult<()> {
    let analysis = parallel_analysis(matrix, &config.parallel_analysis).map_err(err)?;
    let report = FactorReport { indicators: matrix.names.clone(), dropped: matrix.complete_cases().1, analysis };
    run.json(FACTOR_REPORT, &report)?;
    let rows: Vec<Vec<String>> = (0..report.analysis.p)
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt4(Some(report.analysis.observed_eigenvalues[k])),
                fmt4(Some(report.analysis.threshold_eigenvalues[k])),
            ]
        })
        .collect();
    run.csv("factor_eigenvalues.csv", &["component", "observed", "threshold"], &rows)
}

fn sem_stage(config: &PipelineConfig, matrix: &IndicatorMatrix, run: &mut Run) -> StageResult<FactorScores> {
    let spec = &config.sem;
    let est = fit_ml(matrix, spec, &FitOptions::default()).map_err(err)?;
    let fit = fit_statistics(&est);
    let (se, se_error) = match robust_se(&est, matrix) {
        Ok(se) => (Some(se), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let scores = factor_scores(&est, matrix).map_err(err)?;
    let inference = |kind: ParamKind| se.as_ref().and_then(|s| s.get(kind));
    let std_loadings = est.standardized_loadings();
    let loadings = (0..spec.n_observed())
        .map(|k| {
            let inf = inference(ParamKind::Loading(k));
            LoadingRow {
                observed_variable: spec.indicators[k].clone(),
                latent_factor: spec.latents[spec.assignment[k]].clone(),
                unstandardized: est.loadings()[k],
                standardized: std_loadings[k],
                se: inf.map(|i| i.se_robust),
                se_naive: inf.map(|i| i.se_naive),
                z: inf.map(|i| i.z),
                p: inf.map(|i| i.p),
            }
        })
        .collect();
    let latent_covariances = spec
        .latent_pairs()
        .into_iter()
        .map(|(a, b)| {
            let inf = inference(ParamKind::LatentCov(a, b));
            LatentCovarianceRow {
                a: spec.latents[b].clone(),
                b: spec.latents[a].clone(),
                covariance: est.psi()[(a, b)],
                se: inf.map(|i| i.se_robust),
                z: inf.map(|i| i.z),
                p: inf.map(|i| i.p),
            }
        })
        .collect();
    let report = SemReport {
        n: est.n,
        dropped: est.dropped,
        fmin: est.fmin,
        iterations: est.iterations,
        gradient_norm: est.gradient_norm,
        heywood: est.heywood.clone(),
        heywood_warning: est.heywood_warning(),
        loadings,
        latent_covariances,
        fit,
        parameters: se.as_ref().map(|s| s.params.clone()).unwrap_or_default(),
        se_error,
        factor_scores_skipped: scores.skipped,
    };
    run.json(SEM_REPORT, &report)?;
    run.csv("sem_loadings.csv", &SEM_LOADINGS_HEADER, &report.loadings_rows())?;
    run.csv("sem_fit.csv", &SEM_FIT_HEADER, &report.fit_rows())?;
    run.csv("sem_latent.csv", &SEM_LATENT_HEADER, &report.latent_rows())?;
    Ok(scores)
}

fn composite_stage(
    config: &PipelineConfig,
    scores: &FactorScores,
    run: &mut Run,
) -> StageResult<BTreeMap<String, f64>> {
    let reverse: Vec<bool> = scores.latents.iter().map(|l| config.composite_reverse.contains(l)).collect();
    let (model, index) = build_composite(&scores.scores, &scores.latents, &reverse).map_err(err)?;
    let n = scores.scores.nrows();
    let k = scores.latents.len();
    let mut transformed = DMatrix::zeros(n, k);
    for i in 0..n {
        let row: Vec<f64> = scores.scores.row(i).iter().copied().collect();
        for (j, v) in model.transform(&row).into_iter().enumerate() {
            transformed[(i, j)] = v;
        }
    }
    let reliability = cronbach_alpha(&transformed).map_err(err)?;
    let distribution = index_distribution(&index).map_err(err)?;
    let report = CompositeReport { model, reliability, distribution, scored: n };
    run.json(COMPOSITE_REPORT, &report)?;
    let score_rows: Vec<Vec<String>> =
        scores.respondent_ids.iter().zip(&index).map(|(id, v)| vec![id.clone(), fmt4(Some(*v))]).collect();
    run.csv("composite_scores.csv", &["respondent_id", INDEX], &score_rows)?;
    let d = &report.distribution;
    let density_rows: Vec<Vec<String>> =
        d.grid.iter().zip(&d.density).map(|(x, y)| vec![fmt4(Some(*x)), fmt4(Some(*y))]).collect();
    run.csv("composite_density.csv", &["x", "density"], &density_rows)?;
    Ok(scores.respondent_ids.iter().cloned().zip(index).collect())
}

fn in_sample(gender: Gender, sample: Sample) -> bool {
    match sample {
        Sample::All => true,
        Sample::Women => gender == Gender::Female,
        Sample::Men => gender == Gender::Male,
    }
}

/// Rows of `sample` with every variable present, and the variables' values on
/// those rows.
fn complete_rows(table: &VariableTable, vars: &[&str], sample: Sample) -> StageResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let cols: Vec<Vec<Option<f64>>> = vars
        .iter()
        .map(|v| table.column(v).ok_or_else(|| format!("unknown variable `{v}`")))
        .collect::<StageResult<_>>()?;
    let rows: Vec<usize> = (0..table.len())
        .filter(|&i| in_sample(table.respondent(i).gender, sample) && cols.iter().all(|c| c[i].is_some()))
        .collect();
    let values = cols.iter().map(|c| rows.iter().map(|&i| c[i].unwrap_or(f64::NAN)).collect()).collect();
    Ok((rows, values))
}

fn design(names: &[String], values: &[Vec<f64>]) -> Design {
    let columns: Vec<(&str, &[f64])> = names.iter().zip(values).map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    Design::with_intercept(&columns)
}

fn model_vars<'a>(outcome: &'a str, regressors: &'a [String]) -> Vec<&'a str> {
    std::iter::once(outcome).chain(regressors.iter().map(String::as_str)).collect()
}

fn couple_ids(table: &VariableTable, rows: &[usize]) -> Vec<String> {
    rows.iter().map(|&i| table.respondent(i).couple_id.clone()).collect()
}

fn ols_table(table: &VariableTable, spec: &OlsTableSpec) -> StageResult<OlsTableReport> {
    let mut models = Vec::new();
    for m in &spec.models {
        let (rows, values) = complete_rows(table, &model_vars(&m.outcome, &m.regressors), spec.sample)?;
        let x = design(&m.regressors, &values[1..]);
        let clusters = couple_ids(table, &rows);
        let clusters = (spec.se_kind == SeKind::Cluster).then_some(clusters.as_slice());
        let (result, error) = match ols_fit(&values[0], &x, spec.se_kind, clusters) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        models.push(OlsModelReport { outcome: m.outcome.clone(), regressors: m.regressors.clone(), result, error });
    }
    Ok(OlsTableReport { name: spec.name.clone(), sample: spec.sample, se_kind: spec.se_kind, models })
}

fn subgroup_table(table: &VariableTable, spec: &SubgroupTableSpec) -> StageResult<SubgroupTableReport> {
    let m = &spec.model;
    let (rows, values) = complete_rows(table, &model_vars(&m.outcome, &m.regressors), Sample::All)?;
    let x = design(&m.regressors, &values[1..]);
    let clusters = couple_ids(table, &rows);
    let mut groups = Vec::new();
    for s in &spec.splits {
        let col = table.column(&s.variable).ok_or_else(|| format!("unknown variable `{}`", s.variable))?;
        let sub: Vec<Option<f64>> = rows.iter().map(|&i| col[i]).collect();
        match subgroup_split(&sub, s.rule) {
            Ok(labels) => {
                let mask = |want: bool| labels.iter().map(|l| *l == Some(want)).collect();
                let g = GroupSpec {
                    split: s.variable.clone(),
                    groups: vec![(s.labels[0].clone(), mask(false)), (s.labels[1].clone(), mask(true))],
                };
                groups.extend(subgroup_regressions(&values[0], &x, &clusters, &[g]));
            }
            Err(e) => {
                for label in &s.labels {
                    groups.push(SubgroupResult {
                        split: s.variable.clone(),
                        group: label.clone(),
                        n: 0,
                        estimate: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    Ok(SubgroupTableReport { name: spec.name.clone(), outcome: m.outcome.clone(), regressors: m.regressors.clone(), groups })
}

fn probit_report(table: &VariableTable, spec: &ProbitSpec) -> StageResult<ProbitReport> {
    let regressors: Vec<String> = std::iter::once(spec.focal.clone()).chain(spec.covariates.iter().cloned()).collect();
    let (_, values) = complete_rows(table, &model_vars(&spec.outcome, &regressors), spec.sample)?;
    let outcome = &values[0];
    let binary = outcome.iter().all(|&v| v == 0.0 || v == 1.0);
    let threshold = match spec.binarize {
        _ if binary || outcome.is_empty() => None,
        SplitRule::Median => Some(crate::stats::median(outcome)),
        SplitRule::Threshold(t) => Some(t),
    };
    let mut report = ProbitReport {
        name: spec.name.clone(),
        focal: spec.focal.clone(),
        covariates: spec.covariates.clone(),
        threshold,
        share_above: None,
        result: None,
        error: None,
    };
    let present: Vec<Option<f64>> = outcome.iter().map(|&v| Some(v)).collect();
    let estimated = subgroup_split(&present, spec.binarize).map_err(err).and_then(|labels| {
        let y: Vec<f64> = labels.iter().map(|l| if *l == Some(true) { 1.0 } else { 0.0 }).collect();
        report.share_above = Some(y.iter().sum::<f64>() / y.len() as f64);
        let x = design(&regressors, &values[1..]);
        let fit = probit_fit(&y, &x).map_err(err)?;
        probit_ame(&fit, &x, &spec.focal, FocalKind::Auto).map_err(err)
    });
    match estimated {
        Ok(r) => report.result = Some(r),
        Err(e) => report.error = Some(e),
    }
    Ok(report)
}

fn validate_stage(
    config: &PipelineConfig,
    dataset: &DerivedDataset,
    index: &BTreeMap<String, f64>,
    run: &mut Run,
) -> StageResult<()> {
    let table = VariableTable::new(dataset, index);
    let suite = &config.regressions;
    let report = ValidateReport {
        ols: suite.ols.iter().map(|t| ols_table(&table, t)).collect::<StageResult<_>>()?,
        subgroups: suite.subgroups.iter().map(|t| subgroup_table(&table, t)).collect::<StageResult<_>>()?,
        probit: suite.probit.iter().map(|p| probit_report(&table, p)).collect::<StageResult<_>>()?,
    };
    run.json(VALIDATE_REPORT, &report)?;
    run.csv("validate_ols.csv", &OLS_HEADER, &report.ols_rows())?;
    run.csv("validate_subgroups.csv", &SUBGROUP_HEADER, &report.subgroup_rows())?;
    run.csv("validate_probit.csv", &PROBIT_HEADER, &report.probit_rows())
}

#[cfg(test)]
mod tests;
