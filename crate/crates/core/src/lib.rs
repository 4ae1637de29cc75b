//! Measurement pipeline for a composite index of tolerant attitudes towards
//! domestic violence, built from matched-couple survey items and time-use
//! diaries.
//!
//! The stages mirror the data flow:
//!
//! * [`ingest`] parses and validates the survey, diary and taxonomy files and
//!   matches respondents into couples.
//! * [`derive`] turns diaries into weekly hours, within-couple gender gaps and
//!   leisure asymmetries, and assembles the SEM indicator matrix.
//! * [`factor`] estimates correlation matrices and runs parallel analysis.
//! * [`sem`] fits the three-factor confirmatory model by maximum likelihood.
//! * [`composite`] combines the factor scores into a single index.
//! * [`validate`] provides OLS (classical, robust, clustered) and probit
//!   estimators used to validate the index.
//! * [`synth`] generates synthetic couple datasets with known parameters.
//! * [`pipeline`] wires the stages together and writes the report bundle.

pub mod composite;
pub mod derive;
pub mod factor;
pub mod ingest;
pub mod pipeline;
pub mod sem;
pub mod stats;
pub mod synth;
pub mod validate;

pub use composite::{CompositeModel, ReliabilityReport};
pub use derive::{DerivedDataset, IndicatorMatrix, WeeklyHours};
pub use factor::{CovMatrix, ParallelAnalysisResult};
pub use ingest::{ActivityGroup, CoupleRecord, DiaryDay, SurveyResponse, Taxonomy};
pub use sem::{FitStats, SemEstimate, SemSpec};
pub use synth::GeneratorSpec;
pub use validate::{OlsResult, ProbitResult, SeKind};
