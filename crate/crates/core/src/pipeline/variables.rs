//! Named regression variables over the derived dataset.

use crate::derive::{DerivedDataset, DerivedIndicators};
use crate::ingest::{Gender, VignetteArm};
use std::collections::{BTreeMap, HashMap};

/// The composite index.
pub const INDEX: &str = "index";
pub const PARTNER_PREFIX: &str = "partner_";

const RESPONDENT_VARIABLES: [&str; 15] = [
    "female",
    "education_years",
    "employed",
    "bargaining_power",
    "gender_norms_index",
    "parenthood_norms",
    "leisure_with_partner",
    "leisure_with_partner_children",
    "chores_hours",
    "childcare_hours",
    "charity",
    "center_knowledge",
    "way_out",
    "vignette_physical",
    "info_treated",
];

const COUPLE_VARIABLES: [&str; 4] =
    ["chores_gap", "childcare_gap", "leisure_with_partner_asymmetry", "leisure_with_partner_children_asymmetry"];

fn is_respondent_variable(name: &str) -> bool {
    name == INDEX || RESPONDENT_VARIABLES.contains(&name)
}

/// Every name a regression may refer to. Respondent-level variables can be
/// prefixed with `partner_` to take the partner's value.
pub fn is_known_variable(name: &str) -> bool {
    is_respondent_variable(name)
        || COUPLE_VARIABLES.contains(&name)
        || name.strip_prefix(PARTNER_PREFIX).is_some_and(is_respondent_variable)
}

pub fn known_variables() -> Vec<String> {
    let mut out: Vec<String> = std::iter::once(INDEX).chain(RESPONDENT_VARIABLES).map(String::from).collect();
    out.extend(COUPLE_VARIABLES.map(String::from));
    out.extend(std::iter::once(INDEX).chain(RESPONDENT_VARIABLES).map(|v| format!("{PARTNER_PREFIX}{v}")));
    out
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn respondent_value(r: &DerivedIndicators, name: &str) -> Option<f64> {
    match name {
        "female" => Some(flag(r.gender == Gender::Female)),
        "education_years" => Some(r.education_years),
        "employed" => Some(flag(r.employed)),
        "bargaining_power" => r.bargaining_power.map(f64::from),
        "gender_norms_index" => r.gender_norms_index,
        "parenthood_norms" => r.parenthood_norms,
        "leisure_with_partner" => Some(r.leisure_with_partner),
        "leisure_with_partner_children" => Some(r.leisure_with_partner_children),
        "chores_hours" => Some(r.chores_hours),
        "childcare_hours" => Some(r.childcare_hours),
        "charity" => r.charity,
        "center_knowledge" => r.center_knowledge,
        "way_out" => r.way_out,
        "vignette_physical" => Some(flag(r.vignette_arm == VignetteArm::Physical)),
        "info_treated" => Some(flag(r.info_treated)),
        _ => None,
    }
}

/// Column access by variable name, one entry per derived respondent.
pub struct VariableTable<'a> {
    dataset: &'a DerivedDataset,
    index: Vec<Option<f64>>,
    partner: Vec<Option<usize>>,
    couple: Vec<Option<usize>>,
}

impl<'a> VariableTable<'a> {
    /// `index` maps respondent ids to composite scores; respondents without a
    /// score get a missing index.
    pub fn new(dataset: &'a DerivedDataset, index: &BTreeMap<String, f64>) -> Self {
        let couple_pos: HashMap<&str, usize> =
            dataset.couples.iter().enumerate().map(|(i, c)| (c.couple_id.as_str(), i)).collect();
        let mut by_couple: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, r) in dataset.respondents.iter().enumerate() {
            by_couple.entry(r.couple_id.as_str()).or_default().push(i);
        }
        let partner = dataset
            .respondents
            .iter()
            .enumerate()
            .map(|(i, r)| by_couple[r.couple_id.as_str()].iter().copied().find(|&j| j != i))
            .collect();
        VariableTable {
            dataset,
            index: dataset.respondents.iter().map(|r| index.get(&r.respondent_id).copied()).collect(),
            partner,
            couple: dataset.respondents.iter().map(|r| couple_pos.get(r.couple_id.as_str()).copied()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dataset.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn respondent(&self, i: usize) -> &DerivedIndicators {
        &self.dataset.respondents[i]
    }

    fn own(&self, i: usize, name: &str) -> Option<f64> {
        if name == INDEX {
            self.index[i]
        } else {
            respondent_value(&self.dataset.respondents[i], name)
        }
    }

    fn value(&self, i: usize, name: &str) -> Option<f64> {
        if let Some(base) = name.strip_prefix(PARTNER_PREFIX) {
            return self.partner[i].and_then(|j| self.own(j, base));
        }
        if COUPLE_VARIABLES.contains(&name) {
            let c = &self.dataset.couples[self.couple[i]?];
            let (value, defined) = match name {
                "chores_gap" => (c.chores_gap.value, c.chores_gap.defined),
                "childcare_gap" => (c.childcare_gap.value, c.childcare_gap.defined),
                "leisure_with_partner_asymmetry" => (c.partner_asymmetry.value, c.partner_asymmetry.defined),
                _ => (c.partner_children_asymmetry.value, c.partner_children_asymmetry.defined),
            };
            return defined.then_some(value);
        }
        self.own(i, name)
    }

    /// `None` for unknown names.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        is_known_variable(name).then(|| (0..self.len()).map(|i| self.value(i, name)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derive::derive_dataset;
    use crate::ingest::match_couples;
    use crate::synth::{simulate_couples, GeneratorSpec};

    #[test]
    fn partner_values_swap_within_couple() {
        let sim = simulate_couples(&GeneratorSpec::couple_defaults(5)).unwrap();
        let matched = match_couples(&sim.surveys, &sim.diaries);
        let dataset = derive_dataset(&matched.couples).unwrap();
        let index: BTreeMap<String, f64> =
            dataset.respondents.iter().enumerate().map(|(i, r)| (r.respondent_id.clone(), i as f64)).collect();
        let table = VariableTable::new(&dataset, &index);
        let own = table.column("education_years").unwrap();
        let partner = table.column("partner_education_years").unwrap();
        let partner_index = table.column("partner_index").unwrap();
        for i in 0..table.len() {
            let j = i ^ 1;
            assert_eq!(partner[i], own[j]);
            assert_eq!(partner_index[i], Some(j as f64));
        }
        let gap = table.column("chores_gap").unwrap();
        assert_eq!(gap[0], gap[1]);
        assert!(table.column("no_such_variable").is_none());
    }

    #[test]
    fn every_listed_variable_resolves() {
        let sim = simulate_couples(&GeneratorSpec::couple_defaults(3)).unwrap();
        let matched = match_couples(&sim.surveys, &sim.diaries);
        let dataset = derive_dataset(&matched.couples).unwrap();
        let table = VariableTable::new(&dataset, &BTreeMap::new());
        for name in known_variables() {
            assert!(is_known_variable(&name), "{name}");
            assert_eq!(table.column(&name).unwrap().len(), 6, "{name}");
        }
    }
}
