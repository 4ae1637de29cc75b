use super::{header_index, line_of, open, parse_bool, IngestError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const FIXED_SURVEY_COLUMNS: [&str; 8] =
    ["respondent_id", "couple_id", "gender", "education_years", "employed", "vignette_arm", "info_treated", "weight"];

/// Registered item keys.
pub mod keys {
    pub const SERIOUSNESS: &str = "seriousness";
    pub const VICTIM_BLAMING: &str = "victim_blaming";
    pub const PERPETRATOR_ACCOUNTABILITY: &str = "perpetrator_accountability";
    pub const JUSTIFICATION: &str = "justification";
    pub const PHYSICAL_STRENGTH: &str = "physical_strength";
    pub const EMOTIONAL_STRENGTH: &str = "emotional_strength";
    pub const EMOTIONAL_TOUGHNESS: &str = "emotional_toughness";
    pub const MINIMIZATION_OF_HARASSMENT: &str = "minimization_of_harassment";
    pub const DRINKING: &str = "drinking";
    pub const PARENTHOOD_NORMS: &str = "parenthood_norms";
    pub const BARGAINING: &str = "bargaining";
    pub const CHARITY: &str = "charity";
    pub const CENTER_KNOWLEDGE: &str = "center_knowledge";
    pub const WAY_OUT: &str = "way_out";
    pub const GENDER_NORMS: [&str; 10] = [
        "gender_norm_01",
        "gender_norm_02",
        "gender_norm_03",
        "gender_norm_04",
        "gender_norm_05",
        "gender_norm_06",
        "gender_norm_07",
        "gender_norm_08",
        "gender_norm_09",
        "gender_norm_10",
    ];
    pub const VIGNETTE: [&str; 4] = [SERIOUSNESS, VICTIM_BLAMING, PERPETRATOR_ACCOUNTABILITY, JUSTIFICATION];
    pub const MASCULINITY: [&str; 5] =
        [PHYSICAL_STRENGTH, EMOTIONAL_STRENGTH, EMOTIONAL_TOUGHNESS, MINIMIZATION_OF_HARASSMENT, DRINKING];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VignetteArm {
    Physical,
    Psychological,
}

impl VignetteArm {
    pub fn as_str(self) -> &'static str {
        match self {
            VignetteArm::Physical => "physical",
            VignetteArm::Psychological => "psychological",
        }
    }
}

/// Who usually makes the couple's economic decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bargaining {
    Alone,
    Jointly,
    PartnerAlone,
}

impl Bargaining {
    pub fn code(self) -> u8 {
        match self {
            Bargaining::Alone => 1,
            Bargaining::Jointly => 2,
            Bargaining::PartnerAlone => 3,
        }
    }

    pub fn from_code(raw: &str) -> Option<Self> {
        match raw {
            "1" => Some(Bargaining::Alone),
            "2" => Some(Bargaining::Jointly),
            "3" => Some(Bargaining::PartnerAlone),
            _ => None,
        }
    }

    /// 1 when the respondent decides alone or jointly with the partner.
    pub fn power(self) -> u8 {
        match self {
            Bargaining::Alone | Bargaining::Jointly => 1,
            Bargaining::PartnerAlone => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Agreement on a 0–100 scale.
    Score,
    /// Coded 1/2/3, see [`Bargaining`].
    Bargaining,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDef {
    pub key: String,
    pub kind: ItemKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRegistry {
    pub items: Vec<ItemDef>,
}

impl Default for ItemRegistry {
    fn default() -> Self {
        let score = |k: &str| ItemDef { key: k.to_string(), kind: ItemKind::Score };
        let mut items: Vec<ItemDef> = keys::VIGNETTE.iter().chain(keys::MASCULINITY.iter()).map(|k| score(k)).collect();
        items.extend(keys::GENDER_NORMS.iter().map(|k| score(k)));
        items.push(score(keys::PARENTHOOD_NORMS));
        items.push(ItemDef { key: keys::BARGAINING.to_string(), kind: ItemKind::Bargaining });
        items.extend([keys::CHARITY, keys::CENTER_KNOWLEDGE, keys::WAY_OUT].map(score));
        ItemRegistry { items }
    }
}

impl ItemRegistry {
    pub fn kind_of(&self, key: &str) -> Option<ItemKind> {
        self.items.iter().find(|d| d.key == key).map(|d| d.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub respondent_id: String,
    pub couple_id: String,
    pub gender: Gender,
    pub education_years: f64,
    pub employed: bool,
    pub vignette_arm: VignetteArm,
    pub info_treated: bool,
    pub weight: Option<f64>,
    /// 0–100 item scores; absent items were left blank.
    pub items: BTreeMap<String, f64>,
    pub bargaining: Option<Bargaining>,
}

impl SurveyResponse {
    pub fn item(&self, key: &str) -> Option<f64> {
        self.items.get(key).copied()
    }
}

pub fn parse_survey(path: &Path, registry: &ItemRegistry) -> Result<Vec<SurveyResponse>> {
    read_survey(open(path)?, registry)
}

pub fn read_survey<R: Read>(reader: R, registry: &ItemRegistry) -> Result<Vec<SurveyResponse>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index = header_index(&headers, "survey")?;
    let mut fixed = [0usize; 8];
    for (slot, name) in fixed.iter_mut().zip(FIXED_SURVEY_COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| IngestError::SchemaMismatch {
            schema: "survey",
            detail: format!("missing column {name:?}"),
        })?;
    }
    let mut item_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if FIXED_SURVEY_COLUMNS.contains(&h) {
            continue;
        }
        let kind = registry.kind_of(h).ok_or_else(|| IngestError::UnknownItem(h.to_string()))?;
        item_cols.push((i, h.to_string(), kind));
    }
    let [c_resp, c_couple, c_gender, c_edu, c_emp, c_arm, c_info, c_weight] = fixed;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let field = |c: usize| record.get(c).unwrap_or("");
        let required = |c: usize, name: &str| -> Result<&str> {
            match field(c) {
                "" => Err(IngestError::MissingRequiredField { line, field: name.to_string() }),
                v => Ok(v),
            }
        };
        let invalid = |name: &str, v: &str| IngestError::InvalidField { line, field: name.into(), value: v.into() };

        let respondent_id = required(c_resp, "respondent_id")?.to_string();
        let couple_id = required(c_couple, "couple_id")?.to_string();
        let gender = match required(c_gender, "gender")? {
            "female" => Gender::Female,
            "male" => Gender::Male,
            v => return Err(invalid("gender", v)),
        };
        let raw_edu = required(c_edu, "education_years")?;
        let education_years: f64 = raw_edu.parse().ok().filter(|v: &f64| *v >= 0.0).ok_or_else(|| invalid("education_years", raw_edu))?;
        let employed = parse_bool(line, "employed", field(c_emp))?;
        let vignette_arm = match required(c_arm, "vignette_arm")? {
            "physical" => VignetteArm::Physical,
            "psychological" => VignetteArm::Psychological,
            v => return Err(invalid("vignette_arm", v)),
        };
        let info_treated = parse_bool(line, "info_treated", field(c_info))?;
        let weight = match field(c_weight) {
            "" => None,
            raw => Some(raw.parse::<f64>().ok().filter(|w| *w > 0.0 && w.is_finite()).ok_or_else(|| invalid("weight", raw))?),
        };

        let mut items = BTreeMap::new();
        let mut bargaining = None;
        for (c, key, kind) in &item_cols {
            let raw = field(*c);
            if raw.is_empty() {
                continue;
            }
            match kind {
                ItemKind::Score => {
                    let value: f64 = raw.parse().map_err(|_| invalid(key, raw))?;
                    if !(0.0..=100.0).contains(&value) {
                        return Err(IngestError::OutOfRangeScore { respondent_id, item: key.clone(), value });
                    }
                    items.insert(key.clone(), value);
                }
                ItemKind::Bargaining => {
                    bargaining = Some(Bargaining::from_code(raw).ok_or_else(|| IngestError::InvalidBargaining {
                        respondent_id: respondent_id.clone(),
                        value: raw.to_string(),
                    })?);
                }
            }
        }
        out.push(SurveyResponse {
            respondent_id,
            couple_id,
            gender,
            education_years,
            employed,
            vignette_arm,
            info_treated,
            weight,
            items,
            bargaining,
        });
    }
    Ok(out)
}

/// Writes responses with one column per registered item, in registry order.
/// Numbers use the shortest representation that parses back to the same value.
pub fn write_survey<W: Write>(
    writer: W,
    registry: &ItemRegistry,
    responses: &[SurveyResponse],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> =
        FIXED_SURVEY_COLUMNS.iter().copied().chain(registry.items.iter().map(|d| d.key.as_str())).collect();
    w.write_record(&header)?;
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for r in responses {
        let mut row = vec![
            r.respondent_id.clone(),
            r.couple_id.clone(),
            r.gender.as_str().to_string(),
            r.education_years.to_string(),
            flag(r.employed),
            r.vignette_arm.as_str().to_string(),
            flag(r.info_treated),
            r.weight.map(|v| v.to_string()).unwrap_or_default(),
        ];
        for def in &registry.items {
            row.push(match def.kind {
                ItemKind::Score => r.item(&def.key).map(|v| v.to_string()).unwrap_or_default(),
                ItemKind::Bargaining => r.bargaining.map(|b| b.code().to_string()).unwrap_or_default(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
