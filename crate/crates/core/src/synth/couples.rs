use super::diary_fill::{feasible_units, split_units};
use super::{clip, normal, unit_rng, GeneratorSpec, PopulationIndex, Result, SynthError};
use crate::derive::{CHILDCARE_GAP, CHORES_GAP};
use crate::ingest::{
    keys, write_diary, write_survey, ActivityCode, ActivityGroup, Bargaining, DayKind, DiaryDay, Gender, ItemRegistry,
    Slot, SurveyResponse, Taxonomy, VignetteArm, SLOTS_PER_DAY,
};
use crate::sem::LATENT_GENDER_GAP;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// Diary and regression-layer parameters for couple datasets. Hours are
/// weekly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoupleParams {
    /// Latent shared by both partners; its indicators are the gap measures.
    pub couple_latent: String,
    pub male_chores_mean: f64,
    pub male_chores_sd: f64,
    pub male_childcare_mean: f64,
    pub male_childcare_sd: f64,
    /// Leisure with partner and children: intercept and slope on the index.
    pub lpc_intercept: f64,
    pub lpc_slope: f64,
    /// Leisure with partner (any company): intercept and slope on the index.
    pub lp_intercept: f64,
    pub lp_slope: f64,
    /// Couple-level random intercept sd, shared by both partners.
    pub couple_sd: f64,
    /// Respondent-level noise sd.
    pub noise_sd: f64,
    /// Men report this much more shared leisure than their partners.
    pub male_report_inflation: f64,
}

impl Default for CoupleParams {
    fn default() -> Self {
        CoupleParams {
            couple_latent: LATENT_GENDER_GAP.into(),
            male_chores_mean: 8.0,
            male_chores_sd: 2.0,
            male_childcare_mean: 6.0,
            male_childcare_sd: 2.0,
            lpc_intercept: 15.5,
            lpc_slope: 1.335,
            lp_intercept: 18.7,
            lp_slope: 0.783,
            couple_sd: 2.0,
            noise_sd: 3.5,
            male_report_inflation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentTruth {
    pub respondent_id: String,
    pub couple_id: String,
    pub gender: Gender,
    pub latents: Vec<f64>,
    /// Composite index from population parameters and the emitted items.
    pub index: f64,
    pub lp_target: f64,
    pub lpc_target: f64,
    /// Hours actually written into the diaries.
    pub lp_hours: f64,
    pub lpc_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleTruth {
    pub couple_id: String,
    pub chores_gap_target: f64,
    pub chores_gap: f64,
    pub childcare_gap_target: f64,
    pub childcare_gap: f64,
    pub male_chores_hours: f64,
    pub female_chores_hours: f64,
    pub male_childcare_hours: f64,
    pub female_childcare_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: GeneratorSpec,
    pub population_index: PopulationIndex,
    /// Share of clipped survey item values.
    pub clip_fraction: f64,
    /// Set when clipping is frequent enough to bias the loadings.
    pub clip_warning: bool,
    pub respondents: Vec<RespondentTruth>,
    pub couples: Vec<CoupleTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCouples {
    pub surveys: Vec<SurveyResponse>,
    pub diaries: Vec<DiaryDay>,
    pub truth: Truth,
}

struct CoupleDraw {
    surveys: [SurveyResponse; 2],
    /// Weekday and weekend for the female partner, then the male.
    diaries: Vec<DiaryDay>,
    people: [RespondentTruth; 2],
    couple: CoupleTruth,
    clipped: usize,
}

/// Per-day slot counts of each activity block for one respondent.
#[derive(Default)]
struct DayPlan {
    leisure_partner_children: (usize, usize),
    leisure_partner_only: (usize, usize),
    chores: (usize, usize),
    childcare: (usize, usize),
}

fn units_or_err(hours: f64, id: &str, what: &str) -> Result<usize> {
    feasible_units(hours).ok_or_else(|| SynthError::InfeasibleTarget { respondent_id: id.into(), what: what.into(), hours })
}

fn split(units: usize) -> (usize, usize) {
    split_units(units).expect("feasible_units only returns splittable counts")
}

fn code(name: &str, group: ActivityGroup) -> ActivityCode {
    ActivityCode { code: name.into(), group }
}

fn build_day(id: &str, kind: DayKind, plan: &DayPlan) -> Result<DiaryDay> {
    let pick = |p: (usize, usize)| if kind == DayKind::Weekday { p.0 } else { p.1 };
    let blocks = [
        (pick(plan.leisure_partner_children), code("socializing", ActivityGroup::Leisure), true, true),
        (pick(plan.leisure_partner_only), code("dining_out", ActivityGroup::Leisure), true, false),
        (pick(plan.chores), code("meal_preparation", ActivityGroup::Chores), false, false),
        (pick(plan.childcare), code("child_physical_care", ActivityGroup::Childcare), false, true),
    ];
    let used: usize = blocks.iter().map(|b| b.0).sum();
    if used > SLOTS_PER_DAY {
        return Err(SynthError::InfeasibleTarget {
            respondent_id: id.into(),
            what: format!("{} activities ({used} slots)", kind.as_str()),
            hours: used as f64 / 6.0,
        });
    }
    let sleep = (SLOTS_PER_DAY - used).min(48);
    let mut slots = Vec::with_capacity(SLOTS_PER_DAY);
    let mut push = |n: usize, c: &ActivityCode, partner: bool, children: bool| {
        for _ in 0..n {
            slots.push(Slot { primary: c.clone(), secondary: None, with_partner: partner, with_children: children });
        }
    };
    push(sleep, &code("sleep", ActivityGroup::Leisure), false, false);
    for (n, c, partner, children) in &blocks {
        push(*n, c, *partner, *children);
    }
    push(SLOTS_PER_DAY - used - sleep, &code("paid_work", ActivityGroup::Other), false, false);
    Ok(DiaryDay { respondent_id: id.into(), day_kind: kind, slots })
}

struct Layout {
    survey_cols: Vec<(usize, usize)>,
    chores_col: usize,
    childcare_col: usize,
    couple_latent: usize,
    cond_mean: DVector<f64>,
    cond_chol: DMatrix<f64>,
    others: Vec<usize>,
}

fn layout(spec: &GeneratorSpec) -> Result<Layout> {
    let find = |name: &str| {
        spec.indicators
            .iter()
            .position(|i| i.name == name)
            .ok_or_else(|| SynthError::InvalidSpec(format!("couple datasets need indicator {name}")))
    };
    let chores_col = find(CHORES_GAP)?;
    let childcare_col = find(CHILDCARE_GAP)?;
    let couple_latent = spec
        .latent_index(&spec.couples.couple_latent)
        .ok_or_else(|| SynthError::InvalidSpec(format!("unknown couple latent {}", spec.couples.couple_latent)))?;
    let sem = spec.sem_spec();
    let mut survey_cols = Vec::new();
    for (k, ind) in spec.indicators.iter().enumerate() {
        if k == chores_col || k == childcare_col {
            if sem.assignment[k] != couple_latent {
                return Err(SynthError::InvalidSpec(format!("{} must load on the couple latent", ind.name)));
            }
        } else {
            if sem.assignment[k] == couple_latent {
                return Err(SynthError::InvalidSpec(format!("{} cannot load on the couple latent", ind.name)));
            }
            survey_cols.push((k, sem.assignment[k]));
        }
    }
    // Individual latents given the shared one: N(Ψ_oc g, Ψ_oo − Ψ_oc Ψ_co).
    let psi = spec.psi();
    let others: Vec<usize> = (0..spec.latents.len()).filter(|&j| j != couple_latent).collect();
    let cond_mean = DVector::from_iterator(others.len(), others.iter().map(|&j| psi[(j, couple_latent)]));
    let cov = DMatrix::from_fn(others.len(), others.len(), |a, b| psi[(others[a], others[b])]) - &cond_mean * cond_mean.transpose();
    let cond_chol = Cholesky::new(cov).ok_or(SynthError::NonPdPsi)?.l();
    Ok(Layout { survey_cols, chores_col, childcare_col, couple_latent, cond_mean, cond_chol, others })
}

fn to_pair<T>(v: Vec<T>) -> [T; 2] {
    v.try_into().unwrap_or_else(|_| unreachable!("one entry per partner"))
}

fn uniform_score(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0..=100) as f64
}

fn norm_item(rng: &mut ChaCha8Rng, index: f64) -> f64 {
    (50.0 + 8.0 * index + 15.0 * normal(rng)).round().clamp(0.0, 100.0)
}

fn draw_couple(spec: &GeneratorSpec, lay: &Layout, pop: &PopulationIndex, c: usize) -> Result<CoupleDraw> {
    let mut rng = unit_rng(spec.seed, c as u64);
    let params = &spec.couples;
    let couple_id = format!("c{:05}", c + 1);
    let mut clipped = 0;

    let g = normal(&mut rng);
    let gap_of = |col: usize, rng: &mut ChaCha8Rng, clipped: &mut usize| {
        let ind = &spec.indicators[col];
        clip(ind.mean + ind.loading * g + ind.residual_variance.sqrt() * normal(rng), ind.clip, clipped)
    };
    let mut gap_clipped = 0;
    let chores_target = gap_of(lay.chores_col, &mut rng, &mut gap_clipped);
    let childcare_target = gap_of(lay.childcare_col, &mut rng, &mut gap_clipped);

    let male_id = format!("{couple_id}-m");
    let female_id = format!("{couple_id}-f");
    let male_hours = |mean: f64, sd: f64, rng: &mut ChaCha8Rng| (mean + sd * normal(rng)).clamp(mean / 3.0, 3.0 * mean);
    let km_chores = units_or_err(male_hours(params.male_chores_mean, params.male_chores_sd, &mut rng), &male_id, "chores")?;
    let km_care =
        units_or_err(male_hours(params.male_childcare_mean, params.male_childcare_sd, &mut rng), &male_id, "childcare")?;
    let kf_chores = units_or_err(km_chores as f64 / 6.0 * (1.0 + chores_target), &female_id, "chores")?;
    let kf_care = units_or_err(km_care as f64 / 6.0 * (1.0 + childcare_target), &female_id, "childcare")?;
    let realized_gap = |kf: usize, km: usize| if km == 0 { f64::NAN } else { kf as f64 / km as f64 - 1.0 };
    let chores_gap = realized_gap(kf_chores, km_chores);
    let childcare_gap = realized_gap(kf_care, km_care);

    let couple_u = params.couple_sd * normal(&mut rng);
    let mut surveys = Vec::with_capacity(2);
    let mut diaries = Vec::with_capacity(2);
    let mut people = Vec::with_capacity(2);
    for (gender, id, k_chores, k_care) in
        [(Gender::Female, &female_id, kf_chores, kf_care), (Gender::Male, &male_id, km_chores, km_care)]
    {
        let z = DVector::from_fn(lay.others.len(), |_, _| normal(&mut rng));
        let own = &lay.cond_mean * g + &lay.cond_chol * z;
        let mut eta = vec![0.0; spec.latents.len()];
        eta[lay.couple_latent] = g;
        for (a, &j) in lay.others.iter().enumerate() {
            eta[j] = own[a];
        }

        let mut x = vec![0.0; spec.indicators.len()];
        x[lay.chores_col] = chores_gap;
        x[lay.childcare_col] = childcare_gap;
        let mut items = BTreeMap::new();
        for &(k, a) in &lay.survey_cols {
            let ind = &spec.indicators[k];
            let v = clip(ind.mean + ind.loading * eta[a] + ind.residual_variance.sqrt() * normal(&mut rng), ind.clip, &mut clipped);
            x[k] = v;
            items.insert(ind.name.clone(), v);
        }
        let index = pop.score(&x);

        let inflate = if gender == Gender::Male { 1.0 + params.male_report_inflation } else { 1.0 };
        let lpc_target = ((params.lpc_intercept + couple_u) * inflate
            + params.lpc_slope * index
            + params.noise_sd * normal(&mut rng))
        .max(0.0);
        let k_lpc = units_or_err(lpc_target, id, "leisure with partner and children")?;
        let lp_target = ((params.lp_intercept + couple_u) * inflate + params.lp_slope * index + params.noise_sd * normal(&mut rng))
            .max(k_lpc as f64 / 6.0);
        let k_only = units_or_err(lp_target - k_lpc as f64 / 6.0, id, "leisure with partner")?;

        let plan = DayPlan {
            leisure_partner_children: split(k_lpc),
            leisure_partner_only: split(k_only),
            chores: split(k_chores),
            childcare: split(k_care),
        };
        diaries.push(build_day(id, DayKind::Weekday, &plan)?);
        diaries.push(build_day(id, DayKind::Weekend, &plan)?);

        for key in keys::GENDER_NORMS {
            items.insert(key.to_string(), norm_item(&mut rng, index));
        }
        items.insert(keys::PARENTHOOD_NORMS.into(), norm_item(&mut rng, index));
        for key in [keys::CHARITY, keys::CENTER_KNOWLEDGE, keys::WAY_OUT] {
            items.insert(key.into(), uniform_score(&mut rng));
        }
        let bargaining = [Bargaining::Alone, Bargaining::Jointly, Bargaining::PartnerAlone][rng.random_range(0..3)];
        surveys.push(SurveyResponse {
            respondent_id: id.clone(),
            couple_id: couple_id.clone(),
            gender,
            education_years: rng.random_range(8..=18) as f64,
            employed: rng.random_bool(0.65),
            vignette_arm: if rng.random_bool(0.5) { VignetteArm::Physical } else { VignetteArm::Psychological },
            info_treated: rng.random_bool(0.5),
            weight: None,
            items,
            bargaining: Some(bargaining),
        });
        people.push(RespondentTruth {
            respondent_id: id.clone(),
            couple_id: couple_id.clone(),
            gender,
            latents: eta,
            index,
            lp_target,
            lpc_target,
            lp_hours: (k_lpc + k_only) as f64 / 6.0,
            lpc_hours: k_lpc as f64 / 6.0,
        });
    }

    Ok(CoupleDraw {
        surveys: to_pair(surveys),
        diaries,
        people: to_pair(people),
        couple: CoupleTruth {
            couple_id,
            chores_gap_target: chores_target,
            chores_gap,
            childcare_gap_target: childcare_target,
            childcare_gap,
            male_chores_hours: km_chores as f64 / 6.0,
            female_chores_hours: kf_chores as f64 / 6.0,
            male_childcare_hours: km_care as f64 / 6.0,
            female_childcare_hours: kf_care as f64 / 6.0,
        },
        clipped,
    })
}

/// Draw every couple. Couples are generated in parallel from per-couple
/// streams and collected in couple order.
pub fn simulate_couples(spec: &GeneratorSpec) -> Result<SimulatedCouples> {
    spec.validate()?;
    let lay = layout(spec)?;
    let pop = PopulationIndex::new(spec, &spec.couples.couple_latent);
    let draws: Vec<CoupleDraw> =
        (0..spec.n_couples).into_par_iter().map(|c| draw_couple(spec, &lay, &pop, c)).collect::<Result<_>>()?;

    let clippable = spec.n_couples * 2 * lay.survey_cols.iter().filter(|(k, _)| spec.indicators[*k].clip.is_some()).count();
    let clipped: usize = draws.iter().map(|d| d.clipped).sum();
    let clip_fraction = if clippable == 0 { 0.0 } else { clipped as f64 / clippable as f64 };
    let mut surveys = Vec::with_capacity(2 * draws.len());
    let mut diaries = Vec::with_capacity(4 * draws.len());
    let mut respondents = Vec::with_capacity(2 * draws.len());
    let mut couples = Vec::with_capacity(draws.len());
    for d in draws {
        surveys.extend(d.surveys);
        diaries.extend(d.diaries);
        respondents.extend(d.people);
        couples.push(d.couple);
    }
    Ok(SimulatedCouples {
        surveys,
        diaries,
        truth: Truth {
            spec: spec.clone(),
            population_index: pop,
            clip_fraction,
            clip_warning: clip_fraction >= CLIP_WARNING,
            respondents,
            couples,
        },
    })
}

/// Clip fraction above which a warning is attached to the truth file.
pub const CLIP_WARNING: f64 = 0.05;

pub const SURVEY_FILE: &str = "survey.csv";
pub const DIARY_FILE: &str = "diary.csv";
pub const TAXONOMY_FILE: &str = "taxonomy.csv";
pub const TRUTH_FILE: &str = "truth.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| SynthError::Io { path: path.display().to_string(), source })
}

/// Write `survey.csv`, `diary.csv`, `taxonomy.csv` and `truth.json`.
pub fn write_bundle(dir: &Path, sim: &SimulatedCouples) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.display().to_string(), source })?;
    write_survey(create(&dir.join(SURVEY_FILE))?, &ItemRegistry::default(), &sim.surveys)?;
    write_diary(create(&dir.join(DIARY_FILE))?, &sim.diaries)?;
    Taxonomy::default().write(create(&dir.join(TAXONOMY_FILE))?)?;
    serde_json::to_writer_pretty(create(&dir.join(TRUTH_FILE))?, &sim.truth)?;
    Ok(())
}

pub fn simulate_couple_dataset(spec: &GeneratorSpec, dir: &Path) -> Result<SimulatedCouples> {
    let sim = simulate_couples(spec)?;
    write_bundle(dir, &sim)?;
    Ok(sim)
}
