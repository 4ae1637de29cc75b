//! Parsing, validation and couple matching of the survey and diary inputs.

mod couples;
mod diary;
mod survey;
mod taxonomy;

pub use couples::{match_couples, CoupleMember, CoupleRecord, Exclusion, ExclusionReason, MatchOutcome};
pub use diary::{parse_diary, read_diary, write_diary, DayKind, DiaryDay, Slot, SLOTS_PER_DAY};
pub use survey::{
    keys,
    parse_survey, read_survey, write_survey, Bargaining, Gender, ItemDef, ItemKind, ItemRegistry,
    SurveyResponse, VignetteArm, FIXED_SURVEY_COLUMNS,
};
pub use taxonomy::{ActivityCode, ActivityGroup, Taxonomy};

use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("header does not match the {schema} schema: {detail}")]
    SchemaMismatch { schema: &'static str, detail: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingRequiredField { line: u64, field: String },
    #[error("line {line}: invalid value {value:?} for `{field}`")]
    InvalidField { line: u64, field: String, value: String },
    #[error("line {line}: unknown activity code {code:?}")]
    UnknownActivity { line: u64, code: String },
    #[error("line {line}: unknown activity group {group:?}")]
    UnknownGroup { line: u64, group: String },
    #[error("line {line}: activity code {code:?} assigned twice")]
    DuplicateCode { line: u64, code: String },
    #[error("line {line}: slot index {slot} outside 0..144 (only 10-minute diaries are accepted)")]
    SlotOutOfRange { line: u64, slot: i64 },
    #[error("respondent {respondent_id} {day_kind}: slot {slot} recorded twice")]
    DuplicateSlot { respondent_id: String, day_kind: DayKind, slot: usize },
    #[error("respondent {respondent_id} {day_kind}: slot {slot} missing")]
    MissingSlot { respondent_id: String, day_kind: DayKind, slot: usize },
    #[error("unknown item column {0:?}")]
    UnknownItem(String),
    #[error("respondent {respondent_id}: item {item} score {value} outside [0, 100]")]
    OutOfRangeScore { respondent_id: String, item: String, value: f64 },
    #[error("respondent {respondent_id}: bargaining response {value:?} is not 1 (alone), 2 (jointly) or 3 (partner)")]
    InvalidBargaining { respondent_id: String, value: String },
}

pub type Result<T> = std::result::Result<T, IngestError>;

pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Column name → position, after checking for duplicated names.
pub(crate) fn header_index(headers: &csv::StringRecord, schema: &'static str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if index.insert(h.trim().to_string(), i).is_some() {
            return Err(IngestError::SchemaMismatch { schema, detail: format!("duplicate column {h:?}") });
        }
    }
    Ok(index)
}

pub(crate) fn parse_bool(line: u64, field: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        "" => Err(IngestError::MissingRequiredField { line, field: field.to_string() }),
        other => Err(IngestError::InvalidField { line, field: field.to_string(), value: other.to_string() }),
    }
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}
