use super::variables::is_known_variable;
use super::PipelineError;
use crate::derive::{SplitRule, SEM_INDICATORS};
use crate::factor::ParallelAnalysisSettings;
use crate::ingest::ItemRegistry;
use crate::sem::{SemSpec, LATENT_GENDER_GAP};
use crate::validate::SeKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "TADV_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub survey: PathBuf,
    pub diary: PathBuf,
    pub taxonomy: PathBuf,
}

/// Which respondents enter a regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    #[default]
    All,
    Women,
    Men,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
}

/// A table of OLS models sharing a sample and standard-error type. Clustered
/// errors always cluster on the couple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OlsTableSpec {
    pub name: String,
    #[serde(default)]
    pub sample: Sample,
    pub se_kind: SeKind,
    pub models: Vec<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub variable: String,
    #[serde(default)]
    pub rule: SplitRule,
    /// Labels for the groups at or below and above the cut.
    pub labels: [String; 2],
}

/// One model re-estimated within each group of each split, with
/// couple-clustered errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupTableSpec {
    pub name: String,
    pub model: ModelSpec,
    pub splits: Vec<SplitSpec>,
}

/// Probit of a binarized outcome; reports the average marginal effect of
/// `focal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbitSpec {
    pub name: String,
    #[serde(default)]
    pub sample: Sample,
    pub outcome: String,
    /// The outcome is 1 above the cut, computed within the sample.
    #[serde(default)]
    pub binarize: SplitRule,
    pub focal: String,
    #[serde(default)]
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSuite {
    #[serde(default)]
    pub ols: Vec<OlsTableSpec>,
    #[serde(default)]
    pub subgroups: Vec<SubgroupTableSpec>,
    #[serde(default)]
    pub probit: Vec<ProbitSpec>,
}

fn model(outcome: &str, regressors: &[&str]) -> ModelSpec {
    ModelSpec { outcome: outcome.into(), regressors: regressors.iter().map(|s| s.to_string()).collect() }
}

fn split(variable: &str, low: &str, high: &str) -> SplitSpec {
    SplitSpec { variable: variable.into(), rule: SplitRule::Median, labels: [low.into(), high.into()] }
}

fn subgroup_splits() -> Vec<SplitSpec> {
    vec![
        split("female", "men", "women"),
        split("education_years", "low_education", "high_education"),
        split("employed", "not_employed", "employed"),
        split("bargaining_power", "no_bargaining_power", "bargaining_power"),
        split("parenthood_norms", "low_parenthood_norms", "high_parenthood_norms"),
        split("charity", "low_charity", "high_charity"),
        split("center_knowledge", "low_center_knowledge", "high_center_knowledge"),
        split("way_out", "low_way_out", "high_way_out"),
    ]
}

impl Default for RegressionSuite {
    /// Correlates of the index, partner characteristics among women, leisure
    /// with the partner on the index (overall and by subgroup), and the
    /// information-treatment probit.
    fn default() -> Self {
        let own = ["female", "education_years", "employed", "bargaining_power", "gender_norms_index", "parenthood_norms"];
        let partner = [
            "partner_education_years",
            "partner_employed",
            "partner_bargaining_power",
            "partner_gender_norms_index",
            "partner_parenthood_norms",
        ];
        RegressionSuite {
            ols: vec![
                OlsTableSpec {
                    name: "index_correlates".into(),
                    sample: Sample::All,
                    se_kind: SeKind::Robust,
                    models: own.iter().map(|v| model("index", &[v])).collect(),
                },
                OlsTableSpec {
                    name: "partner_correlates".into(),
                    sample: Sample::Women,
                    se_kind: SeKind::Robust,
                    models: partner.iter().map(|v| model("index", &[v])).collect(),
                },
                OlsTableSpec {
                    name: "leisure".into(),
                    sample: Sample::All,
                    se_kind: SeKind::Cluster,
                    models: vec![
                        model("leisure_with_partner", &["index"]),
                        model("leisure_with_partner_children", &["index"]),
                    ],
                },
            ],
            subgroups: vec![
                SubgroupTableSpec {
                    name: "leisure_with_partner_by_group".into(),
                    model: model("leisure_with_partner", &["index"]),
                    splits: subgroup_splits(),
                },
                SubgroupTableSpec {
                    name: "leisure_with_partner_children_by_group".into(),
                    model: model("leisure_with_partner_children", &["index"]),
                    splits: subgroup_splits(),
                },
            ],
            probit: vec![
                ProbitSpec {
                    name: "treatment_model_a".into(),
                    sample: Sample::Women,
                    outcome: "index".into(),
                    binarize: SplitRule::Median,
                    focal: "vignette_physical".into(),
                    covariates: vec![],
                },
                ProbitSpec {
                    name: "treatment_model_b".into(),
                    sample: Sample::Women,
                    outcome: "index".into(),
                    binarize: SplitRule::Median,
                    focal: "vignette_physical".into(),
                    covariates: vec!["info_treated".into()],
                },
            ],
        }
    }
}

fn default_reverse() -> Vec<String> {
    vec![LATENT_GENDER_GAP.to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub inputs: InputPaths,
    #[serde(default)]
    pub items: ItemRegistry,
    #[serde(default)]
    pub parallel_analysis: ParallelAnalysisSettings,
    #[serde(default)]
    pub sem: SemSpec,
    /// Latents whose standardized scores are negated before the PCA.
    #[serde(default = "default_reverse")]
    pub composite_reverse: Vec<String>,
    #[serde(default)]
    pub regressions: RegressionSuite,
    pub output_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::ConfigInvalid(msg.into())
}

impl PipelineConfig {
    /// Default configuration for a bundle with the standard file names.
    pub fn for_bundle(dir: &Path, output_dir: &Path) -> Self {
        use crate::synth::{DIARY_FILE, SURVEY_FILE, TAXONOMY_FILE};
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            inputs: InputPaths {
                survey: dir.join(SURVEY_FILE),
                diary: dir.join(DIARY_FILE),
                taxonomy: dir.join(TAXONOMY_FILE),
            },
            items: ItemRegistry::default(),
            parallel_analysis: ParallelAnalysisSettings::default(),
            sem: SemSpec::default(),
            composite_reverse: default_reverse(),
            regressions: RegressionSuite::default(),
            output_dir: output_dir.to_path_buf(),
        }
    }

    /// Reads a config file. Relative paths are resolved against the file's
    /// directory. Does not validate; see [`PipelineConfig::check`].
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.inputs.survey, &mut cfg.inputs.diary, &mut cfg.inputs.taxonomy, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Applies [`OUTPUT_DIR_ENV`] if set and non-empty.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates everything that can be checked without running a stage.
    pub fn check(&self) -> Result<(), PipelineError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for (what, p) in
            [("survey", &self.inputs.survey), ("diary", &self.inputs.diary), ("taxonomy", &self.inputs.taxonomy)]
        {
            if !p.is_file() {
                return Err(invalid(format!("{what} file {} does not exist", p.display())));
            }
        }
        if self.items.items.is_empty() {
            return Err(invalid("item registry is empty"));
        }
        self.parallel_analysis.validate().map_err(|e| invalid(e.to_string()))?;
        self.sem.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(bad) = self.sem.indicators.iter().find(|i| !SEM_INDICATORS.contains(&i.as_str())) {
            return Err(invalid(format!("SEM indicator `{bad}` is not a derived indicator")));
        }
        for latent in &self.composite_reverse {
            if !self.sem.latents.contains(latent) {
                return Err(invalid(format!("composite_reverse names unknown latent `{latent}`")));
            }
        }
        self.check_regressions()
    }

    fn check_regressions(&self) -> Result<(), PipelineError> {
        let known = |what: &str, v: &str| {
            if is_known_variable(v) {
                Ok(())
            } else {
                Err(invalid(format!("{what}: unknown variable `{v}`")))
            }
        };
        let check_model = |what: &str, m: &ModelSpec| {
            known(what, &m.outcome)?;
            if m.regressors.is_empty() {
                return Err(invalid(format!("{what}: model without regressors")));
            }
            m.regressors.iter().try_for_each(|r| known(what, r))
        };
        let r = &self.regressions;
        for t in &r.ols {
            if t.models.is_empty() {
                return Err(invalid(format!("{}: table without models", t.name)));
            }
            t.models.iter().try_for_each(|m| check_model(&t.name, m))?;
        }
        for t in &r.subgroups {
            check_model(&t.name, &t.model)?;
            t.splits.iter().try_for_each(|s| known(&t.name, &s.variable))?;
        }
        for p in &r.probit {
            known(&p.name, &p.outcome)?;
            known(&p.name, &p.focal)?;
            p.covariates.iter().try_for_each(|c| known(&p.name, c))?;
        }
        let mut names: Vec<&str> = r
            .ols
            .iter()
            .map(|t| t.name.as_str())
            .chain(r.subgroups.iter().map(|t| t.name.as_str()))
            .chain(r.probit.iter().map(|p| p.name.as_str()))
            .collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate regression name `{}`", w[0])));
        }
        Ok(())
    }
}
