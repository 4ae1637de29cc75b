//! Derived behavioural and attitudinal variables.
//!
//! Weekly hours are always `5 × weekday hours + 2 × weekend hours`, with each
//! diary slot worth exactly one sixth of an hour. Only primary activities count.

mod export;
mod indicators;

pub use export::{write_couples_csv, write_respondents_csv};
pub use indicators::{indicator_matrix, IndicatorMatrix, CHILDCARE_GAP, CHORES_GAP, SEM_INDICATORS};

use crate::ingest::keys;
use crate::ingest::{ActivityGroup, CoupleMember, CoupleRecord, DiaryDay, Gender, Slot, SurveyResponse, VignetteArm};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DeriveError {
    #[error("weekday diary belongs to {weekday}, weekend diary to {weekend}")]
    MismatchedRespondent { weekday: String, weekend: String },
    #[error("respondent {respondent_id}: expected a {expected} diary")]
    WrongDayKind { respondent_id: String, expected: &'static str },
    #[error("respondent {respondent_id}: item {item} missing")]
    MissingItem { respondent_id: String, item: String },
    #[error("cannot split on a constant variable")]
    ConstantVariable,
    #[error("no non-missing values to split")]
    EmptyVariable,
}

pub type Result<T> = std::result::Result<T, DeriveError>;

pub const HOURS_PER_SLOT: f64 = 1.0 / 6.0;

/// Which slots to count: primary activity group plus co-presence requirements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotFilter {
    pub groups: Vec<ActivityGroup>,
    pub require_partner: bool,
    pub require_children: bool,
}

impl SlotFilter {
    pub fn group(group: ActivityGroup) -> Self {
        SlotFilter { groups: vec![group], require_partner: false, require_children: false }
    }

    pub fn leisure_with_partner() -> Self {
        SlotFilter { groups: vec![ActivityGroup::Leisure], require_partner: true, require_children: false }
    }

    pub fn leisure_with_partner_children() -> Self {
        SlotFilter { groups: vec![ActivityGroup::Leisure], require_partner: true, require_children: true }
    }

    pub fn matches(&self, slot: &Slot) -> bool {
        self.groups.contains(&slot.primary.group)
            && (!self.require_partner || slot.with_partner)
            && (!self.require_children || slot.with_children)
    }

    pub fn describe(&self) -> String {
        let mut s = self.groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join("|");
        if self.require_partner {
            s.push_str("+partner");
        }
        if self.require_children {
            s.push_str("+children");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyHours {
    pub respondent_id: String,
    pub filter: String,
    pub hours: f64,
}

/// `5 × weekday + 2 × weekend`, from slot counts.
pub fn hours_from_counts(weekday_slots: usize, weekend_slots: usize) -> f64 {
    (5 * weekday_slots + 2 * weekend_slots) as f64 * HOURS_PER_SLOT
}

pub fn weekly_hours(weekday: &DiaryDay, weekend: &DiaryDay, filter: &SlotFilter) -> Result<WeeklyHours> {
    if weekday.respondent_id != weekend.respondent_id {
        return Err(DeriveError::MismatchedRespondent {
            weekday: weekday.respondent_id.clone(),
            weekend: weekend.respondent_id.clone(),
        });
    }
    use crate::ingest::DayKind;
    if weekday.day_kind != DayKind::Weekday {
        return Err(DeriveError::WrongDayKind { respondent_id: weekday.respondent_id.clone(), expected: "weekday" });
    }
    if weekend.day_kind != DayKind::Weekend {
        return Err(DeriveError::WrongDayKind { respondent_id: weekend.respondent_id.clone(), expected: "weekend" });
    }
    let count = |d: &DiaryDay| d.slots.iter().filter(|s| filter.matches(s)).count();
    Ok(WeeklyHours {
        respondent_id: weekday.respondent_id.clone(),
        filter: filter.describe(),
        hours: hours_from_counts(count(weekday), count(weekend)),
    })
}

fn member_hours(member: &CoupleMember, filter: &SlotFilter) -> Result<WeeklyHours> {
    weekly_hours(&member.weekday, &member.weekend, filter)
}

pub fn leisure_with_partner(member: &CoupleMember) -> Result<WeeklyHours> {
    member_hours(member, &SlotFilter::leisure_with_partner())
}

pub fn leisure_with_partner_children(member: &CoupleMember) -> Result<WeeklyHours> {
    member_hours(member, &SlotFilter::leisure_with_partner_children())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapDomain {
    Chores,
    Childcare,
}

impl GapDomain {
    fn group(self) -> ActivityGroup {
        match self {
            GapDomain::Chores => ActivityGroup::Chores,
            GapDomain::Childcare => ActivityGroup::Childcare,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenderGap {
    pub couple_id: String,
    pub domain: GapDomain,
    pub value: f64,
    pub defined: bool,
}

/// `(female − male) / male`; `None` when the male time is zero.
pub fn relative_gap(female: f64, male: f64) -> Option<f64> {
    (male > 0.0).then(|| (female - male) / male)
}

pub fn gender_gap(couple: &CoupleRecord, domain: GapDomain) -> Result<GenderGap> {
    let filter = SlotFilter::group(domain.group());
    let f = member_hours(&couple.female, &filter)?.hours;
    let m = member_hours(&couple.male, &filter)?.hours;
    let value = relative_gap(f, m);
    Ok(GenderGap {
        couple_id: couple.couple_id.clone(),
        domain,
        value: value.unwrap_or(f64::NAN),
        defined: value.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymmetryScope {
    WithPartner,
    WithPartnerAndChildren,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleLeisureAsymmetry {
    pub couple_id: String,
    pub scope: AsymmetryScope,
    pub value: f64,
    pub defined: bool,
}

/// `(female − male) / mean(female, male)`; positive when the female partner
/// reports more. `None` when both reports are zero.
pub fn relative_asymmetry(female: f64, male: f64) -> Option<f64> {
    let avg = 0.5 * (female + male);
    (avg != 0.0).then(|| (female - male) / avg)
}

pub fn couple_leisure_asymmetry(couple: &CoupleRecord, scope: AsymmetryScope) -> Result<CoupleLeisureAsymmetry> {
    let filter = match scope {
        AsymmetryScope::WithPartner => SlotFilter::leisure_with_partner(),
        AsymmetryScope::WithPartnerAndChildren => SlotFilter::leisure_with_partner_children(),
    };
    let f = member_hours(&couple.female, &filter)?.hours;
    let m = member_hours(&couple.male, &filter)?.hours;
    let value = relative_asymmetry(f, m);
    Ok(CoupleLeisureAsymmetry {
        couple_id: couple.couple_id.clone(),
        scope,
        value: value.unwrap_or(f64::NAN),
        defined: value.is_some(),
    })
}

/// Arithmetic mean of the ten gender-norm items.
pub fn gender_norms_index(response: &SurveyResponse) -> Result<f64> {
    let mut sum = 0.0;
    for key in keys::GENDER_NORMS {
        sum += response.item(key).ok_or_else(|| DeriveError::MissingItem {
            respondent_id: response.respondent_id.clone(),
            item: key.to_string(),
        })?;
    }
    Ok(sum / keys::GENDER_NORMS.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    #[default]
    Median,
    Threshold(f64),
}

/// Binary subgroup labels: `true` for strictly above the median (or
/// threshold). Variables taking only the values 0 and 1 pass through as-is.
/// Missing values stay missing.
pub fn subgroup_split(values: &[Option<f64>], rule: SplitRule) -> Result<Vec<Option<bool>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(DeriveError::EmptyVariable);
    }
    if present.iter().all(|v| *v == 0.0 || *v == 1.0) {
        return Ok(values.iter().map(|v| v.map(|x| x == 1.0)).collect());
    }
    let cut = match rule {
        SplitRule::Median => {
            if present.iter().all(|v| *v == present[0]) {
                return Err(DeriveError::ConstantVariable);
            }
            crate::stats::median(&present)
        }
        SplitRule::Threshold(t) => t,
    };
    Ok(values.iter().map(|v| v.map(|x| x > cut)).collect())
}

/// Per-respondent derived variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedIndicators {
    pub respondent_id: String,
    pub couple_id: String,
    pub gender: Gender,
    pub education_years: f64,
    pub employed: bool,
    pub vignette_arm: VignetteArm,
    pub info_treated: bool,
    pub weight: Option<f64>,
    pub seriousness: Option<f64>,
    pub victim_blaming: Option<f64>,
    pub perpetrator_accountability: Option<f64>,
    pub justification: Option<f64>,
    pub physical_strength: Option<f64>,
    pub emotional_strength: Option<f64>,
    pub emotional_toughness: Option<f64>,
    pub minimization_of_harassment: Option<f64>,
    pub drinking: Option<f64>,
    pub gender_norms_index: Option<f64>,
    pub parenthood_norms: Option<f64>,
    pub bargaining_power: Option<u8>,
    pub leisure_with_partner: f64,
    pub leisure_with_partner_children: f64,
    pub chores_hours: f64,
    pub childcare_hours: f64,
    pub charity: Option<f64>,
    pub center_knowledge: Option<f64>,
    pub way_out: Option<f64>,
}

impl DerivedIndicators {
    /// Survey item or derived score by key.
    pub fn item(&self, key: &str) -> Option<f64> {
        match key {
            keys::SERIOUSNESS => self.seriousness,
            keys::VICTIM_BLAMING => self.victim_blaming,
            keys::PERPETRATOR_ACCOUNTABILITY => self.perpetrator_accountability,
            keys::JUSTIFICATION => self.justification,
            keys::PHYSICAL_STRENGTH => self.physical_strength,
            keys::EMOTIONAL_STRENGTH => self.emotional_strength,
            keys::EMOTIONAL_TOUGHNESS => self.emotional_toughness,
            keys::MINIMIZATION_OF_HARASSMENT => self.minimization_of_harassment,
            keys::DRINKING => self.drinking,
            keys::PARENTHOOD_NORMS => self.parenthood_norms,
            keys::CHARITY => self.charity,
            keys::CENTER_KNOWLEDGE => self.center_knowledge,
            keys::WAY_OUT => self.way_out,
            _ => None,
        }
    }
}

/// Per-couple derived variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleDerived {
    pub couple_id: String,
    pub chores_gap: GenderGap,
    pub childcare_gap: GenderGap,
    pub partner_asymmetry: CoupleLeisureAsymmetry,
    pub partner_children_asymmetry: CoupleLeisureAsymmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedDataset {
    /// Female then male for each couple, couples in input order.
    pub respondents: Vec<DerivedIndicators>,
    pub couples: Vec<CoupleDerived>,
}

impl DerivedDataset {
    pub fn couple(&self, couple_id: &str) -> Option<&CoupleDerived> {
        self.couples.iter().find(|c| c.couple_id == couple_id)
    }

    pub fn undefined_gap_count(&self) -> usize {
        self.couples.iter().filter(|c| !c.chores_gap.defined || !c.childcare_gap.defined).count()
    }

    pub fn missing_norms_count(&self) -> usize {
        self.respondents.iter().filter(|r| r.gender_norms_index.is_none()).count()
    }
}

fn derive_member(member: &CoupleMember) -> Result<DerivedIndicators> {
    let s = &member.survey;
    Ok(DerivedIndicators {
        respondent_id: s.respondent_id.clone(),
        couple_id: s.couple_id.clone(),
        gender: s.gender,
        education_years: s.education_years,
        employed: s.employed,
        vignette_arm: s.vignette_arm,
        info_treated: s.info_treated,
        weight: s.weight,
        seriousness: s.item(keys::SERIOUSNESS),
        victim_blaming: s.item(keys::VICTIM_BLAMING),
        perpetrator_accountability: s.item(keys::PERPETRATOR_ACCOUNTABILITY),
        justification: s.item(keys::JUSTIFICATION),
        physical_strength: s.item(keys::PHYSICAL_STRENGTH),
        emotional_strength: s.item(keys::EMOTIONAL_STRENGTH),
        emotional_toughness: s.item(keys::EMOTIONAL_TOUGHNESS),
        minimization_of_harassment: s.item(keys::MINIMIZATION_OF_HARASSMENT),
        drinking: s.item(keys::DRINKING),
        gender_norms_index: gender_norms_index(s).ok(),
        parenthood_norms: s.item(keys::PARENTHOOD_NORMS),
        bargaining_power: s.bargaining.map(|b| b.power()),
        leisure_with_partner: leisure_with_partner(member)?.hours,
        leisure_with_partner_children: leisure_with_partner_children(member)?.hours,
        chores_hours: member_hours(member, &SlotFilter::group(ActivityGroup::Chores))?.hours,
        childcare_hours: member_hours(member, &SlotFilter::group(ActivityGroup::Childcare))?.hours,
        charity: s.item(keys::CHARITY),
        center_knowledge: s.item(keys::CENTER_KNOWLEDGE),
        way_out: s.item(keys::WAY_OUT),
    })
}

fn derive_couple(c: &CoupleRecord) -> Result<([DerivedIndicators; 2], CoupleDerived)> {
    let couple = CoupleDerived {
        couple_id: c.couple_id.clone(),
        chores_gap: gender_gap(c, GapDomain::Chores)?,
        childcare_gap: gender_gap(c, GapDomain::Childcare)?,
        partner_asymmetry: couple_leisure_asymmetry(c, AsymmetryScope::WithPartner)?,
        partner_children_asymmetry: couple_leisure_asymmetry(c, AsymmetryScope::WithPartnerAndChildren)?,
    };
    Ok(([derive_member(&c.female)?, derive_member(&c.male)?], couple))
}

/// Derives every variable for every couple. Parallel across couples; output
/// order follows the input.
pub fn derive_dataset(couples: &[CoupleRecord]) -> Result<DerivedDataset> {
    let parts: Vec<_> = couples.par_iter().map(derive_couple).collect::<Result<_>>()?;
    let mut respondents = Vec::with_capacity(2 * parts.len());
    let mut out = Vec::with_capacity(parts.len());
    for (members, couple) in parts {
        respondents.extend(members);
        out.push(couple);
    }
    Ok(DerivedDataset { respondents, couples: out })
}

#[cfg(test)]
mod tests;
