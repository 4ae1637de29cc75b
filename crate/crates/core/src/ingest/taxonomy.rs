use super::{header_index, line_of, open, IngestError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityGroup {
    Chores,
    Childcare,
    Leisure,
    Other,
}

impl ActivityGroup {
    pub const ALL: [ActivityGroup; 4] =
        [ActivityGroup::Chores, ActivityGroup::Childcare, ActivityGroup::Leisure, ActivityGroup::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityGroup::Chores => "chores",
            ActivityGroup::Childcare => "childcare",
            ActivityGroup::Leisure => "leisure",
            ActivityGroup::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

impl fmt::Display for ActivityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A diary activity token resolved against the taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivityCode {
    pub code: String,
    pub group: ActivityGroup,
}

/// Registry mapping every activity code to exactly one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    groups: BTreeMap<String, ActivityGroup>,
}

const DEFAULT_LEISURE: &[&str] = &[
    "sleep",
    "personal_care",
    "reading",
    "social_media",
    "tv_movies",
    "music_podcasts",
    "exercise",
    "creative_activities",
    "internet_browsing",
    "video_games",
    "gardening",
    "socializing",
    "dining_out",
    "events",
];

const DEFAULT_CHORES: &[&str] = &[
    "meal_preparation",
    "laundry",
    "ironing",
    "dusting",
    "vacuuming",
    "indoor_cleaning",
    "household_repairs",
    "shopping",
    "family_management",
];

const DEFAULT_CHILDCARE: &[&str] = &[
    "child_bedtime",
    "child_physical_care",
    "child_reading",
    "child_teaching",
    "child_play",
    "child_outings",
    "child_creative",
    "child_media",
    "child_sports",
    "child_conversation",
    "child_events",
    "child_tasks",
    "child_supervision",
    "child_accompanying",
    "child_homework",
    "child_school_contacts",
    "child_medical",
];

const DEFAULT_OTHER: &[&str] = &["paid_work", "commuting", "study", "travel", "volunteering", "other"];

impl Default for Taxonomy {
    /// Activity lists used by the chores, childcare and leisure definitions.
    fn default() -> Self {
        let mut groups = BTreeMap::new();
        for (codes, group) in [
            (DEFAULT_LEISURE, ActivityGroup::Leisure),
            (DEFAULT_CHORES, ActivityGroup::Chores),
            (DEFAULT_CHILDCARE, ActivityGroup::Childcare),
            (DEFAULT_OTHER, ActivityGroup::Other),
        ] {
            for c in codes {
                groups.insert((*c).to_string(), group);
            }
        }
        Taxonomy { groups }
    }
}

impl Taxonomy {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, ActivityGroup)>,
        S: Into<String>,
    {
        Taxonomy { groups: pairs.into_iter().map(|(c, g)| (c.into(), g)).collect() }
    }

    pub fn resolve(&self, code: &str) -> Option<ActivityCode> {
        self.groups.get(code).map(|&group| ActivityCode { code: code.to_string(), group })
    }

    pub fn group_of(&self, code: &str) -> Option<ActivityGroup> {
        self.groups.get(code).copied()
    }

    pub fn codes_in(&self, group: ActivityGroup) -> impl Iterator<Item = &str> {
        self.groups.iter().filter(move |(_, &g)| g == group).map(|(c, _)| c.as_str())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::read(open(path)?)
    }

    /// Reads a `code,group` CSV.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let index = header_index(rdr.headers()?, "taxonomy")?;
        let (Some(&ci), Some(&gi), 2) = (index.get("code"), index.get("group"), index.len()) else {
            return Err(IngestError::SchemaMismatch {
                schema: "taxonomy",
                detail: "expected columns code,group".into(),
            });
        };
        let mut groups = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = line_of(&record);
            let code = record.get(ci).unwrap_or("");
            if code.is_empty() {
                return Err(IngestError::MissingRequiredField { line, field: "code".into() });
            }
            let raw_group = record.get(gi).unwrap_or("");
            let group = ActivityGroup::parse(raw_group)
                .ok_or_else(|| IngestError::UnknownGroup { line, group: raw_group.to_string() })?;
            if groups.insert(code.to_string(), group).is_some() {
                return Err(IngestError::DuplicateCode { line, code: code.to_string() });
            }
        }
        Ok(Taxonomy { groups })
    }

    pub fn write<W: Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["code", "group"])?;
        for (code, group) in &self.groups {
            w.write_record([code.as_str(), group.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_covers_named_activities() {
        let t = Taxonomy::default();
        assert_eq!(t.group_of("sleep"), Some(ActivityGroup::Leisure));
        assert_eq!(t.group_of("personal_care"), Some(ActivityGroup::Leisure));
        assert_eq!(t.group_of("laundry"), Some(ActivityGroup::Chores));
        assert_eq!(t.group_of("child_homework"), Some(ActivityGroup::Childcare));
        assert_eq!(t.group_of("paid_work"), Some(ActivityGroup::Other));
    }

    #[test]
    fn csv_round_trip() {
        let t = Taxonomy::default();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(Taxonomy::read(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn rejects_unknown_group_and_duplicates() {
        let err = Taxonomy::read("code,group\nsleep,napping\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::UnknownGroup { .. }));
        let err = Taxonomy::read("code,group\nsleep,leisure\nsleep,other\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateCode { .. }));
        let err = Taxonomy::read("code,kind\nsleep,leisure\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::SchemaMismatch { .. }));
    }
}
