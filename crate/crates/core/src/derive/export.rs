use super::DerivedDataset;
use std::io::Write;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn defined(v: f64, ok: bool) -> String {
    if ok {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn write_respondents_csv<W: Write>(writer: W, dataset: &DerivedDataset) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "respondent_id",
        "couple_id",
        "gender",
        "education_years",
        "employed",
        "vignette_arm",
        "info_treated",
        "weight",
        "seriousness",
        "victim_blaming",
        "perpetrator_accountability",
        "justification",
        "physical_strength",
        "emotional_strength",
        "emotional_toughness",
        "minimization_of_harassment",
        "drinking",
        "gender_norms_index",
        "parenthood_norms",
        "bargaining_power",
        "leisure_with_partner",
        "leisure_with_partner_children",
        "chores_hours",
        "childcare_hours",
        "charity",
        "center_knowledge",
        "way_out",
    ])?;
    for r in &dataset.respondents {
        w.write_record([
            r.respondent_id.clone(),
            r.couple_id.clone(),
            r.gender.as_str().to_string(),
            r.education_years.to_string(),
            u8::from(r.employed).to_string(),
            r.vignette_arm.as_str().to_string(),
            u8::from(r.info_treated).to_string(),
            opt(r.weight),
            opt(r.seriousness),
            opt(r.victim_blaming),
            opt(r.perpetrator_accountability),
            opt(r.justification),
            opt(r.physical_strength),
            opt(r.emotional_strength),
            opt(r.emotional_toughness),
            opt(r.minimization_of_harassment),
            opt(r.drinking),
            opt(r.gender_norms_index),
            opt(r.parenthood_norms),
            r.bargaining_power.map(|b| b.to_string()).unwrap_or_default(),
            r.leisure_with_partner.to_string(),
            r.leisure_with_partner_children.to_string(),
            r.chores_hours.to_string(),
            r.childcare_hours.to_string(),
            opt(r.charity),
            opt(r.center_knowledge),
            opt(r.way_out),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Undefined gaps and asymmetries are written as empty cells.
pub fn write_couples_csv<W: Write>(writer: W, dataset: &DerivedDataset) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "couple_id",
        "chores_gap",
        "childcare_gap",
        "leisure_partner_asymmetry",
        "leisure_partner_children_asymmetry",
    ])?;
    for c in &dataset.couples {
        w.write_record([
            c.couple_id.clone(),
            defined(c.chores_gap.value, c.chores_gap.defined),
            defined(c.childcare_gap.value, c.childcare_gap.defined),
            defined(c.partner_asymmetry.value, c.partner_asymmetry.defined),
            defined(c.partner_children_asymmetry.value, c.partner_children_asymmetry.defined),
        ])?;
    }
    w.flush()?;
    Ok(())
}
