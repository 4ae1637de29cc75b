use super::{header_index, line_of, open, parse_bool, ActivityCode, IngestError, Result, Taxonomy};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

/// 24 hours at 10-minute resolution.
pub const SLOTS_PER_DAY: usize = 144;

const DIARY_COLUMNS: [&str; 7] =
    ["respondent_id", "day_kind", "slot_index", "primary_code", "secondary_code", "with_partner", "with_children"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayKind {
    Weekday,
    Weekend,
}

impl DayKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DayKind::Weekday => "weekday",
            DayKind::Weekend => "weekend",
        }
    }
}

impl fmt::Display for DayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub primary: ActivityCode,
    /// Parsed and kept, but no derived variable reads it.
    pub secondary: Option<ActivityCode>,
    pub with_partner: bool,
    pub with_children: bool,
}

/// One respondent-day of exactly [`SLOTS_PER_DAY`] slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiaryDay {
    pub respondent_id: String,
    pub day_kind: DayKind,
    pub slots: Vec<Slot>,
}

pub fn parse_diary(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<DiaryDay>> {
    read_diary(open(path)?, taxonomy)
}

/// Parses a diary CSV. Days come back in order of first appearance.
pub fn read_diary<R: Read>(reader: R, taxonomy: &Taxonomy) -> Result<Vec<DiaryDay>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let index = header_index(rdr.headers()?, "diary")?;
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(DIARY_COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| IngestError::SchemaMismatch {
            schema: "diary",
            detail: format!("missing column {name:?}"),
        })?;
    }
    if index.len() != DIARY_COLUMNS.len() {
        return Err(IngestError::SchemaMismatch { schema: "diary", detail: "unexpected extra columns".into() });
    }
    let [c_resp, c_kind, c_slot, c_primary, c_secondary, c_partner, c_children] = cols;

    let mut order: Vec<(String, DayKind)> = Vec::new();
    let mut days: HashMap<(String, DayKind), Vec<Option<Slot>>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |c: usize| record.get(c).unwrap_or("");

        let respondent_id = field(c_resp);
        if respondent_id.is_empty() {
            return Err(IngestError::MissingRequiredField { line, field: "respondent_id".into() });
        }
        let day_kind = match field(c_kind) {
            "weekday" => DayKind::Weekday,
            "weekend" => DayKind::Weekend,
            other => {
                return Err(IngestError::InvalidField { line, field: "day_kind".into(), value: other.into() })
            }
        };
        let raw_slot = field(c_slot);
        let slot_index: i64 = raw_slot.parse().map_err(|_| IngestError::InvalidField {
            line,
            field: "slot_index".into(),
            value: raw_slot.into(),
        })?;
        if !(0..SLOTS_PER_DAY as i64).contains(&slot_index) {
            return Err(IngestError::SlotOutOfRange { line, slot: slot_index });
        }
        let primary_code = field(c_primary);
        if primary_code.is_empty() {
            return Err(IngestError::MissingRequiredField { line, field: "primary_code".into() });
        }
        let primary = taxonomy
            .resolve(primary_code)
            .ok_or_else(|| IngestError::UnknownActivity { line, code: primary_code.into() })?;
        let secondary = match field(c_secondary) {
            "" => None,
            code => Some(
                taxonomy.resolve(code).ok_or_else(|| IngestError::UnknownActivity { line, code: code.into() })?,
            ),
        };
        let slot = Slot {
            primary,
            secondary,
            with_partner: parse_bool(line, "with_partner", field(c_partner))?,
            with_children: parse_bool(line, "with_children", field(c_children))?,
        };

        let key = (respondent_id.to_string(), day_kind);
        let entry = days.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            vec![None; SLOTS_PER_DAY]
        });
        let cell = &mut entry[slot_index as usize];
        if cell.is_some() {
            return Err(IngestError::DuplicateSlot {
                respondent_id: respondent_id.into(),
                day_kind,
                slot: slot_index as usize,
            });
        }
        *cell = Some(slot);
    }

    order
        .into_iter()
        .map(|key| {
            let cells = days.remove(&key).expect("key recorded on insert");
            let (respondent_id, day_kind) = key;
            let mut slots = Vec::with_capacity(SLOTS_PER_DAY);
            for (i, cell) in cells.into_iter().enumerate() {
                match cell {
                    Some(s) => slots.push(s),
                    None => return Err(IngestError::MissingSlot { respondent_id, day_kind, slot: i }),
                }
            }
            Ok(DiaryDay { respondent_id, day_kind, slots })
        })
        .collect()
}

pub fn write_diary<W: Write>(writer: W, days: &[DiaryDay]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DIARY_COLUMNS)?;
    for day in days {
        for (i, slot) in day.slots.iter().enumerate() {
            w.write_record([
                day.respondent_id.as_str(),
                day.day_kind.as_str(),
                &i.to_string(),
                &slot.primary.code,
                slot.secondary.as_ref().map_or("", |s| s.code.as_str()),
                if slot.with_partner { "1" } else { "0" },
                if slot.with_children { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ActivityGroup;

    fn day_csv(rows: usize, code: &str) -> String {
        let mut s = String::from("respondent_id,day_kind,slot_index,primary_code,secondary_code,with_partner,with_children\n");
        for i in 0..rows {
            s.push_str(&format!("r1,weekday,{i},{code},,0,0\n"));
        }
        s
    }

    #[test]
    fn full_day_of_sleep_is_all_leisure() {
        let days = read_diary(day_csv(144, "sleep").as_bytes(), &Taxonomy::default()).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].slots.len(), SLOTS_PER_DAY);
        assert!(days[0].slots.iter().all(|s| s.primary.group == ActivityGroup::Leisure));
    }

    #[test]
    fn short_day_names_missing_slot() {
        let err = read_diary(day_csv(143, "sleep").as_bytes(), &Taxonomy::default()).unwrap_err();
        match err {
            IngestError::MissingSlot { slot, day_kind, .. } => {
                assert_eq!(slot, 143);
                assert_eq!(day_kind, DayKind::Weekday);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_unknown_and_out_of_range() {
        let mut s = day_csv(144, "sleep");
        s.push_str("r1,weekday,3,sleep,,0,0\n");
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::DuplicateSlot { slot: 3, .. }
        ));
        let s = day_csv(144, "juggling");
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::UnknownActivity { .. }
        ));
        let mut s = day_csv(144, "sleep");
        s.push_str("r1,weekday,144,sleep,,0,0\n");
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::SlotOutOfRange { slot: 144, .. }
        ));
    }

    #[test]
    fn unknown_secondary_rejected_and_bad_bool() {
        let s = day_csv(144, "sleep").replace("r1,weekday,5,sleep,,0,0", "r1,weekday,5,sleep,yodel,0,0");
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::UnknownActivity { .. }
        ));
        let s = day_csv(144, "sleep").replace("r1,weekday,5,sleep,,0,0", "r1,weekday,5,sleep,,yes,0");
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::InvalidField { .. }
        ));
    }

    #[test]
    fn header_must_match_schema() {
        let s = "respondent_id,day_kind,slot_index,primary_code,with_partner,with_children\n";
        assert!(matches!(
            read_diary(s.as_bytes(), &Taxonomy::default()).unwrap_err(),
            IngestError::SchemaMismatch { .. }
        ));
    }

    #[test]
    fn column_permutation_parses_identically() {
        let base = day_csv(144, "tv_movies");
        let permuted: String = base
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                [f[6], f[3], f[0], f[5], f[2], f[4], f[1]].join(",") + "\n"
            })
            .collect();
        let t = Taxonomy::default();
        assert_eq!(read_diary(base.as_bytes(), &t).unwrap(), read_diary(permuted.as_bytes(), &t).unwrap());
    }
}
