use super::*;
use crate::ingest::{DayKind, Taxonomy, SLOTS_PER_DAY};
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Builds a day from (code, with_partner, with_children, slot count) blocks,
/// padding the rest of the day with paid work.
fn day(id: &str, kind: DayKind, blocks: &[(&str, bool, bool, usize)]) -> DiaryDay {
    let t = Taxonomy::default();
    let mut slots = Vec::new();
    for &(code, p, c, n) in blocks {
        for _ in 0..n {
            slots.push(Slot { primary: t.resolve(code).unwrap(), secondary: None, with_partner: p, with_children: c });
        }
    }
    while slots.len() < SLOTS_PER_DAY {
        slots.push(Slot { primary: t.resolve("paid_work").unwrap(), secondary: None, with_partner: false, with_children: false });
    }
    assert_eq!(slots.len(), SLOTS_PER_DAY);
    DiaryDay { respondent_id: id.into(), day_kind: kind, slots }
}

fn survey(id: &str, gender: Gender) -> SurveyResponse {
    SurveyResponse {
        respondent_id: id.into(),
        couple_id: "c".into(),
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

fn member(id: &str, gender: Gender, wd: &[(&str, bool, bool, usize)], we: &[(&str, bool, bool, usize)]) -> CoupleMember {
    CoupleMember { survey: survey(id, gender), weekday: day(id, DayKind::Weekday, wd), weekend: day(id, DayKind::Weekend, we) }
}

#[test]
fn weekly_formula_examples() {
    let all = SlotFilter::group(ActivityGroup::Leisure);
    let wd = day("a", DayKind::Weekday, &[("reading", false, false, 48)]);
    let we = day("a", DayKind::Weekend, &[("reading", false, false, 24)]);
    assert!((weekly_hours(&wd, &we, &all).unwrap().hours - 48.0).abs() < 1e-12);

    let wd = day("a", DayKind::Weekday, &[]);
    let we = day("a", DayKind::Weekend, &[]);
    assert_eq!(weekly_hours(&wd, &we, &all).unwrap().hours, 0.0);

    let wd = day("a", DayKind::Weekday, &[("sleep", false, false, 144)]);
    let we = day("a", DayKind::Weekend, &[("sleep", false, false, 144)]);
    assert!((weekly_hours(&wd, &we, &all).unwrap().hours - 168.0).abs() < 1e-12);
}

#[test]
fn weekly_hours_checks_respondent_and_kind() {
    let f = SlotFilter::leisure_with_partner();
    let wd = day("a", DayKind::Weekday, &[]);
    let we = day("b", DayKind::Weekend, &[]);
    assert!(matches!(weekly_hours(&wd, &we, &f), Err(DeriveError::MismatchedRespondent { .. })));
    let we = day("a", DayKind::Weekday, &[]);
    assert!(matches!(weekly_hours(&wd, &we, &f), Err(DeriveError::WrongDayKind { .. })));
}

#[test]
fn leisure_with_partner_hand_count() {
    // 3 h with partner on the weekday, 2 h on the weekend day: 5*3 + 2*2 = 19
    let m = member(
        "a",
        Gender::Female,
        &[("tv_movies", true, false, 12), ("dining_out", true, true, 6), ("reading", false, false, 30)],
        &[("socializing", true, false, 12), ("sleep", false, false, 48)],
    );
    assert!((leisure_with_partner(&m).unwrap().hours - 19.0).abs() < 1e-12);
    // only the 1 h weekday block had children present
    assert!((leisure_with_partner_children(&m).unwrap().hours - 5.0).abs() < 1e-12);
}

#[test]
fn partner_present_chores_are_not_leisure() {
    let m = member("a", Gender::Male, &[("laundry", true, false, 30)], &[("meal_preparation", true, true, 30)]);
    assert_eq!(leisure_with_partner(&m).unwrap().hours, 0.0);
}

#[test]
fn secondary_activity_ignored() {
    let t = Taxonomy::default();
    let mut m = member("a", Gender::Male, &[], &[]);
    for s in m.weekday.slots.iter_mut() {
        s.secondary = Some(t.resolve("tv_movies").unwrap());
        s.with_partner = true;
    }
    assert_eq!(leisure_with_partner(&m).unwrap().hours, 0.0);
}

#[test]
fn gap_examples() {
    assert_eq!(relative_gap(10.0, 10.0), Some(0.0));
    assert_eq!(relative_gap(15.0, 10.0), Some(0.5));
    assert_eq!(relative_gap(5.0, 0.0), None);
}

#[test]
fn gap_from_diaries_and_undefined_male_zero() {
    let couple = CoupleRecord {
        couple_id: "c".into(),
        // female chores 12 slots weekday, 12 weekend: (60 + 24)/6 = 14 h
        female: member("f", Gender::Female, &[("laundry", false, false, 12)], &[("ironing", false, false, 12)]),
        // male chores: 6 slots weekday, 6 weekend: 7 h
        male: member("m", Gender::Male, &[("shopping", false, false, 6)], &[("dusting", false, false, 6)]),
    };
    let g = gender_gap(&couple, GapDomain::Chores).unwrap();
    assert!(g.defined);
    assert!((g.value - 1.0).abs() < 1e-12);
    let g = gender_gap(&couple, GapDomain::Childcare).unwrap();
    assert!(!g.defined);
}

#[test]
fn asymmetry_examples() {
    assert!((relative_asymmetry(18.0, 22.0).unwrap() + 0.2).abs() < 1e-15);
    assert_eq!(relative_asymmetry(7.0, 7.0), Some(0.0));
    assert_eq!(relative_asymmetry(0.0, 0.0), None);
    assert_eq!(relative_asymmetry(0.0, 3.0), Some(-2.0));
}

#[test]
fn norms_index_examples() {
    let mut r = survey("a", Gender::Female);
    for k in keys::GENDER_NORMS {
        r.items.insert(k.into(), 0.0);
    }
    assert_eq!(gender_norms_index(&r).unwrap(), 0.0);
    for k in keys::GENDER_NORMS {
        r.items.insert(k.into(), 100.0);
    }
    assert_eq!(gender_norms_index(&r).unwrap(), 100.0);
    for (i, k) in keys::GENDER_NORMS.iter().enumerate() {
        r.items.insert((*k).into(), 10.0 * (i + 1) as f64);
    }
    assert_eq!(gender_norms_index(&r).unwrap(), 55.0);
    r.items.remove(keys::GENDER_NORMS[3]);
    assert!(matches!(gender_norms_index(&r), Err(DeriveError::MissingItem { .. })));
}

#[test]
fn split_examples() {
    let v: Vec<Option<f64>> = [1.0, 2.0, 3.0, 4.0].map(Some).to_vec();
    assert_eq!(subgroup_split(&v, SplitRule::Median).unwrap(), vec![Some(false), Some(false), Some(true), Some(true)]);
    let b = vec![Some(1.0), Some(0.0), None, Some(1.0)];
    assert_eq!(subgroup_split(&b, SplitRule::Median).unwrap(), vec![Some(true), Some(false), None, Some(true)]);
    let c = vec![Some(5.0); 4];
    assert_eq!(subgroup_split(&c, SplitRule::Median), Err(DeriveError::ConstantVariable));
    assert_eq!(subgroup_split(&v, SplitRule::Threshold(3.0)).unwrap()[2], Some(false));
}

#[test]
fn split_sizes_match_brute_force_count() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    // charity-like scores with heavy ties on a 0..100 integer scale
    let v: Vec<Option<f64>> = (0..501).map(|_| Some(rng.random_range(0..=20) as f64 * 5.0)).collect();
    let labels = subgroup_split(&v, SplitRule::Median).unwrap();
    let mut sorted: Vec<f64> = v.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[250];
    let above = v.iter().flatten().filter(|x| **x > med).count();
    assert_eq!(labels.iter().filter(|l| **l == Some(true)).count(), above);
    assert_eq!(labels.iter().filter(|l| **l == Some(false)).count(), 501 - above);
}

proptest! {
    #[test]
    fn hours_additive_over_disjoint_groups(
        a in 0usize..40, b in 0usize..40, c in 0usize..40, d in 0usize..40
    ) {
        let m = member("x", Gender::Female,
            &[("laundry", false, false, a), ("child_play", false, true, b)],
            &[("laundry", false, false, c), ("child_play", false, true, d)]);
        let h = |f: &SlotFilter| weekly_hours(&m.weekday, &m.weekend, f).unwrap().hours;
        let chores = h(&SlotFilter::group(ActivityGroup::Chores));
        let child = h(&SlotFilter::group(ActivityGroup::Childcare));
        let both = h(&SlotFilter { groups: vec![ActivityGroup::Chores, ActivityGroup::Childcare], require_partner: false, require_children: false });
        prop_assert!((both - chores - child).abs() < 1e-9);
        prop_assert!(both <= 168.0);
    }

    #[test]
    fn with_children_never_exceeds_with_partner(
        a in 0usize..40, b in 0usize..40, c in 0usize..40
    ) {
        let m = member("x", Gender::Male,
            &[("reading", true, false, a), ("tv_movies", true, true, b), ("exercise", false, true, c)],
            &[("reading", true, true, c), ("tv_movies", false, true, a)]);
        prop_assert!(leisure_with_partner_children(&m).unwrap().hours <= leisure_with_partner(&m).unwrap().hours);
    }

    #[test]
    fn ratios_scale_invariant(f in 0.1f64..100.0, m in 0.1f64..100.0, k in 0.01f64..50.0) {
        let g = relative_gap(f, m).unwrap();
        prop_assert!((relative_gap(k * f, k * m).unwrap() - g).abs() < 1e-9 * (1.0 + g.abs()));
        let a = relative_asymmetry(f, m).unwrap();
        prop_assert!((relative_asymmetry(k * f, k * m).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn asymmetry_antisymmetric_and_bounded(f in 0.0f64..168.0, m in 0.0f64..168.0) {
        prop_assume!(f + m > 0.0);
        let a = relative_asymmetry(f, m).unwrap();
        prop_assert_eq!(a, -relative_asymmetry(m, f).unwrap());
        prop_assert!(a.abs() <= 2.0);
    }

    #[test]
    fn norms_index_order_invariant(vals in proptest::collection::vec(0.0f64..=100.0, 10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut r = survey("a", Gender::Female);
        for (k, v) in keys::GENDER_NORMS.iter().zip(&vals) {
            r.items.insert((*k).into(), *v);
        }
        let mut shuffled = vals.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut s = survey("a", Gender::Female);
        for (k, v) in keys::GENDER_NORMS.iter().zip(&shuffled) {
            s.items.insert((*k).into(), *v);
        }
        let a = gender_norms_index(&r).unwrap();
        prop_assert!((a - gender_norms_index(&s).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=100.0).contains(&a));
    }
}
