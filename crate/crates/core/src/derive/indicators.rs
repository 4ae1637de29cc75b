use super::DerivedDataset;
use crate::ingest::keys;
use nalgebra::DMatrix;

pub const CHORES_GAP: &str = "chores_gap";
pub const CHILDCARE_GAP: &str = "childcare_gap";

/// The eleven observed indicators, in measurement-equation order.
pub const SEM_INDICATORS: [&str; 11] = [
    keys::SERIOUSNESS,
    keys::VICTIM_BLAMING,
    keys::PERPETRATOR_ACCOUNTABILITY,
    keys::JUSTIFICATION,
    keys::EMOTIONAL_STRENGTH,
    keys::DRINKING,
    keys::MINIMIZATION_OF_HARASSMENT,
    keys::PHYSICAL_STRENGTH,
    keys::EMOTIONAL_TOUGHNESS,
    CHORES_GAP,
    CHILDCARE_GAP,
];

/// Respondents × indicators. Missing values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    pub names: Vec<String>,
    pub respondent_ids: Vec<String>,
    pub data: DMatrix<f64>,
}

impl IndicatorMatrix {
    pub fn new(names: Vec<String>, respondent_ids: Vec<String>, data: DMatrix<f64>) -> Self {
        assert_eq!(names.len(), data.ncols(), "one name per column");
        assert_eq!(respondent_ids.len(), data.nrows(), "one id per row");
        IndicatorMatrix { names, respondent_ids, data }
    }

    /// Builds a matrix with generated ids `r0, r1, ...`.
    pub fn from_data(names: &[&str], data: DMatrix<f64>) -> Self {
        let ids = (0..data.nrows()).map(|i| format!("r{i}")).collect();
        Self::new(names.iter().map(|s| s.to_string()).collect(), ids, data)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Listwise deletion: keeps only rows with every indicator present.
    /// Returns the reduced matrix and the number of dropped rows.
    pub fn complete_cases(&self) -> (IndicatorMatrix, usize) {
        let keep: Vec<usize> =
            (0..self.nrows()).filter(|&i| self.data.row(i).iter().all(|v| v.is_finite())).collect();
        let dropped = self.nrows() - keep.len();
        if dropped == 0 {
            return (self.clone(), 0);
        }
        let data = DMatrix::from_fn(keep.len(), self.ncols(), |i, j| self.data[(keep[i], j)]);
        let ids = keep.iter().map(|&i| self.respondent_ids[i].clone()).collect();
        (IndicatorMatrix::new(self.names.clone(), ids, data), dropped)
    }

    /// Copy with columns reordered by `order`.
    pub fn permute_columns(&self, order: &[usize]) -> IndicatorMatrix {
        let data = DMatrix::from_fn(self.nrows(), order.len(), |i, j| self.data[(i, order[j])]);
        let names = order.iter().map(|&j| self.names[j].clone()).collect();
        IndicatorMatrix::new(names, self.respondent_ids.clone(), data)
    }
}

/// SEM indicator matrix from a derived dataset. The couple-level gender gaps
/// are attached to both partners; undefined gaps become NaN.
pub fn indicator_matrix(dataset: &DerivedDataset) -> IndicatorMatrix {
    let n = dataset.respondents.len();
    let mut data = DMatrix::from_element(n, SEM_INDICATORS.len(), f64::NAN);
    for (i, r) in dataset.respondents.iter().enumerate() {
        let couple = dataset.couple(&r.couple_id);
        for (j, name) in SEM_INDICATORS.iter().enumerate() {
            let v = match *name {
                CHORES_GAP => couple.filter(|c| c.chores_gap.defined).map(|c| c.chores_gap.value),
                CHILDCARE_GAP => couple.filter(|c| c.childcare_gap.defined).map(|c| c.childcare_gap.value),
                key => r.item(key),
            };
            data[(i, j)] = v.unwrap_or(f64::NAN);
        }
    }
    IndicatorMatrix::new(
        SEM_INDICATORS.iter().map(|s| s.to_string()).collect(),
        dataset.respondents.iter().map(|r| r.respondent_id.clone()).collect(),
        data,
    )
}
