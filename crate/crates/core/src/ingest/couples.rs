use super::{DayKind, DiaryDay, Gender, SurveyResponse};
use serde::Serialize;
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, PartialEq)]
pub struct CoupleMember {
    pub survey: SurveyResponse,
    pub weekday: DiaryDay,
    pub weekend: DiaryDay,
}

/// A matched female/male pair, each with a complete weekday and weekend diary.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleRecord {
    pub couple_id: String,
    pub female: CoupleMember,
    pub male: CoupleMember,
}

impl CoupleRecord {
    pub fn members(&self) -> [&CoupleMember; 2] {
        [&self.female, &self.male]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    IncompleteDiary,
    MissingPartner,
    SameGender,
    TooManyMembers,
    DuplicateRespondent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub respondent_id: String,
    pub couple_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default)]
pub struct MatchOutcome {
    pub couples: Vec<CoupleRecord>,
    pub excluded: Vec<Exclusion>,
}

impl MatchOutcome {
    pub fn matched_respondents(&self) -> usize {
        2 * self.couples.len()
    }

    /// Flattens the matched couples back into survey and diary inputs.
    pub fn to_inputs(&self) -> (Vec<SurveyResponse>, Vec<DiaryDay>) {
        let mut surveys = Vec::new();
        let mut diaries = Vec::new();
        for c in &self.couples {
            for m in c.members() {
                surveys.push(m.survey.clone());
                diaries.push(m.weekday.clone());
                diaries.push(m.weekend.clone());
            }
        }
        (surveys, diaries)
    }
}

/// Groups survey respondents by couple and attaches diaries. Couples come back
/// in order of first appearance of their id; nothing here is fatal, every
/// respondent not matched is listed with a reason.
pub fn match_couples(surveys: &[SurveyResponse], diaries: &[DiaryDay]) -> MatchOutcome {
    let mut days: HashMap<(&str, DayKind), &DiaryDay> = HashMap::new();
    for d in diaries {
        days.entry((d.respondent_id.as_str(), d.day_kind)).or_insert(d);
    }

    let mut outcome = MatchOutcome::default();
    let mut seen = HashSet::new();
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&SurveyResponse>> = HashMap::new();
    for s in surveys {
        if !seen.insert(s.respondent_id.as_str()) {
            outcome.excluded.push(exclusion(s, ExclusionReason::DuplicateRespondent));
            continue;
        }
        groups
            .entry(s.couple_id.as_str())
            .or_insert_with(|| {
                order.push(s.couple_id.as_str());
                Vec::new()
            })
            .push(s);
    }

    for couple_id in order {
        let members = &groups[couple_id];
        let reason = match members.as_slice() {
            [_] => Some(ExclusionReason::MissingPartner),
            [a, b] if a.gender == b.gender => Some(ExclusionReason::SameGender),
            [_, _] => None,
            _ => Some(ExclusionReason::TooManyMembers),
        };
        if let Some(reason) = reason {
            outcome.excluded.extend(members.iter().map(|s| exclusion(s, reason)));
            continue;
        }
        let attach = |s: &SurveyResponse| -> Option<CoupleMember> {
            let weekday = days.get(&(s.respondent_id.as_str(), DayKind::Weekday))?;
            let weekend = days.get(&(s.respondent_id.as_str(), DayKind::Weekend))?;
            Some(CoupleMember { survey: s.clone(), weekday: (*weekday).clone(), weekend: (*weekend).clone() })
        };
        let (f, m) = if members[0].gender == Gender::Female {
            (members[0], members[1])
        } else {
            (members[1], members[0])
        };
        match (attach(f), attach(m)) {
            (Some(female), Some(male)) => {
                outcome.couples.push(CoupleRecord { couple_id: couple_id.to_string(), female, male })
            }
            _ => outcome.excluded.extend(members.iter().map(|s| exclusion(s, ExclusionReason::IncompleteDiary))),
        }
    }
    outcome
}

fn exclusion(s: &SurveyResponse, reason: ExclusionReason) -> Exclusion {
    Exclusion { respondent_id: s.respondent_id.clone(), couple_id: s.couple_id.clone(), reason }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Slot, Taxonomy, VignetteArm, SLOTS_PER_DAY};
    use std::collections::BTreeMap;

    fn person(id: &str, couple: &str, gender: Gender) -> SurveyResponse {
        SurveyResponse {
            respondent_id: id.into(),
            couple_id: couple.into(),
            gender,
            education_years: 12.0,
            employed: true,
            vignette_arm: VignetteArm::Physical,
            info_treated: false,
            weight: None,
            items: BTreeMap::new(),
            bargaining: None,
        }
    }

    fn day(id: &str, kind: DayKind) -> DiaryDay {
        let sleep = Taxonomy::default().resolve("sleep").unwrap();
        let slot = Slot { primary: sleep, secondary: None, with_partner: false, with_children: false };
        DiaryDay { respondent_id: id.into(), day_kind: kind, slots: vec![slot; SLOTS_PER_DAY] }
    }

    fn both_days(id: &str) -> Vec<DiaryDay> {
        vec![day(id, DayKind::Weekday), day(id, DayKind::Weekend)]
    }

    #[test]
    fn matches_mixed_gender_pair() {
        let surveys = vec![person("m1", "c1", Gender::Male), person("f1", "c1", Gender::Female)];
        let diaries: Vec<_> = ["m1", "f1"].iter().flat_map(|id| both_days(id)).collect();
        let out = match_couples(&surveys, &diaries);
        assert_eq!(out.couples.len(), 1);
        assert_eq!(out.couples[0].female.survey.respondent_id, "f1");
        assert!(out.excluded.is_empty());
    }

    #[test]
    fn missing_weekend_excludes_couple() {
        let surveys = vec![person("f1", "c1", Gender::Female), person("m1", "c1", Gender::Male)];
        let mut diaries = both_days("f1");
        diaries.push(day("m1", DayKind::Weekday));
        let out = match_couples(&surveys, &diaries);
        assert!(out.couples.is_empty());
        assert_eq!(out.excluded.len(), 2);
        assert!(out.excluded.iter().all(|e| e.reason == ExclusionReason::IncompleteDiary));
    }

    #[test]
    fn same_gender_singleton_and_triple() {
        let surveys = vec![
            person("a", "c1", Gender::Female),
            person("b", "c1", Gender::Female),
            person("c", "c2", Gender::Male),
            person("d", "c3", Gender::Male),
            person("e", "c3", Gender::Female),
            person("f", "c3", Gender::Female),
            person("a", "c9", Gender::Female),
        ];
        let diaries: Vec<_> = ["a", "b", "c", "d", "e", "f"].iter().flat_map(|id| both_days(id)).collect();
        let out = match_couples(&surveys, &diaries);
        assert!(out.couples.is_empty());
        let reasons: Vec<_> = out.excluded.iter().map(|e| e.reason).collect();
        assert_eq!(reasons.iter().filter(|r| **r == ExclusionReason::SameGender).count(), 2);
        assert_eq!(reasons.iter().filter(|r| **r == ExclusionReason::MissingPartner).count(), 1);
        assert_eq!(reasons.iter().filter(|r| **r == ExclusionReason::TooManyMembers).count(), 3);
        assert_eq!(reasons.iter().filter(|r| **r == ExclusionReason::DuplicateRespondent).count(), 1);
        assert_eq!(out.matched_respondents() + out.excluded.len(), surveys.len());
    }

    #[test]
    fn matching_is_idempotent() {
        let surveys = vec![
            person("f1", "c1", Gender::Female),
            person("m1", "c1", Gender::Male),
            person("f2", "c2", Gender::Female),
        ];
        let diaries: Vec<_> = ["f1", "m1", "f2"].iter().flat_map(|id| both_days(id)).collect();
        let first = match_couples(&surveys, &diaries);
        let (s, d) = first.to_inputs();
        let second = match_couples(&s, &d);
        assert_eq!(first.couples, second.couples);
        assert!(second.excluded.is_empty());
    }
}
