mod common;

use common::{tiny_instance, TinySpec, STYLES};
use proptest::prelude::*;
use rhhc_core::model::respects_gap;
use rhhc_core::{
    day_patterns, load_instance, save_instance, Budgets, Error, Instance, Patient, PatientKind,
    TimeWindow,
};
use serde_json::json;

fn minimal(budgets: serde_json::Value) -> serde_json::Value {
    json!({
        "days": ["mon"],
        "caregivers": [{ "id": "c1", "wage_rate": 45, "work_windows": [{ "lo": 540, "hi": 1020 }] }],
        "patients": [],
        "travel": { "mean": [[0]], "cost": [[[0]]] },
        "budgets": budgets
    })
}

fn one_patient(budgets: serde_json::Value) -> serde_json::Value {
    json!({
        "days": ["mon", "tue"],
        "caregivers": [{ "id": "c1", "wage_rate": 45, "work_windows": [{ "lo": 540, "hi": 1020 }, null] }],
        "patients": [{
            "id": "e1",
            "kind": "existing",
            "visits_required": 1,
            "service_mean": 53,
            "windows": [{ "lo": 600, "hi": 660 }, { "lo": 0, "hi": 1440 }],
            "revenue": [9350],
            "compatibility": [[true, false]],
            "preassignment": { "caregiver": "c1", "days": ["mon"] }
        }],
        "travel": { "mean": [[0, 23], [23, 0]], "cost": [[[0, 800], [800, 0]], [[0, 800], [800, 0]]] },
        "budgets": budgets
    })
}

#[test]
fn empty_instance_loads() {
    let inst =
        Instance::from_json(&minimal(json!({ "gamma_p": 0, "gamma_t": 0 })).to_string()).unwrap();
    assert_eq!(inst.n_patients(), 0);
    assert_eq!(inst.n_caregivers(), 1);
    assert_eq!(inst.max_per_day(), 8);
}

#[test]
fn negative_budget_rejected() {
    let err = Instance::from_json(&minimal(json!({ "gamma_p": -1, "gamma_t": 0 })).to_string())
        .unwrap_err();
    match err {
        Error::Validation(msg) => assert_eq!(msg, "budgets nonnegative"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_file_is_a_parse_error() {
    assert!(matches!(
        Instance::from_json("{ \"days\": [").unwrap_err(),
        Error::Parse(_)
    ));
    let mut v = minimal(json!({ "gamma_p": 0, "gamma_t": 0 }));
    v["surprise"] = json!(1);
    assert!(matches!(
        Instance::from_json(&v.to_string()).unwrap_err(),
        Error::Parse(_)
    ));
}

#[test]
fn medium_preset_sets_budgets_and_deviations() {
    let inst =
        Instance::from_json(&one_patient(json!({ "preset": "medium" })).to_string()).unwrap();
    assert_eq!(inst.budgets, Budgets::new(4, 4));
    // 20% of 53 and 23, rounded half up
    assert_eq!(inst.patients[0].service_dev, 11);
    assert_eq!(inst.travel.deviation(0, 1), 5);
    assert_eq!(inst.travel.deviation(1, 0), 5);
}

#[test]
fn preset_and_explicit_budgets_conflict() {
    let err = Instance::from_json(
        &one_patient(json!({ "preset": "low", "gamma_p": 1, "gamma_t": 1 })).to_string(),
    );
    assert!(matches!(err, Err(Error::Validation(_))));
}

#[test]
fn existing_patient_needs_preassignment() {
    let mut v = one_patient(json!({ "gamma_p": 0, "gamma_t": 0 }));
    v["patients"][0]
        .as_object_mut()
        .unwrap()
        .remove("preassignment");
    assert!(matches!(
        Instance::from_json(&v.to_string()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn preassignment_on_a_day_off_rejected() {
    let mut v = one_patient(json!({ "gamma_p": 0, "gamma_t": 0 }));
    v["patients"][0]["preassignment"]["days"] = json!(["tue"]);
    assert!(matches!(
        Instance::from_json(&v.to_string()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn unknown_caregiver_rejected() {
    let mut v = one_patient(json!({ "gamma_p": 0, "gamma_t": 0 }));
    v["patients"][0]["preassignment"]["caregiver"] = json!("c9");
    let err = Instance::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("c9"), "{err}");
}

#[test]
fn file_round_trip_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..20u64 {
        let inst = tiny_instance(seed, TinySpec::oracle(STYLES[seed as usize % 3]));
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_instance(&inst, &a).unwrap();
        let back = load_instance(&a).unwrap();
        assert_eq!(back.data(), inst.data());
        save_instance(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn pattern_examples() {
    let set = |v: usize, gap: usize| -> Vec<Vec<usize>> {
        day_patterns(&patient(v, gap), 5)
            .into_iter()
            .map(|p| p.into_iter().map(|d| d.0 + 1).collect())
            .collect()
    };
    assert_eq!(set(1, 0), vec![vec![1], vec![2], vec![3], vec![4], vec![5]]);
    let mut pairs = set(2, 1);
    pairs.sort();
    assert_eq!(
        pairs,
        vec![
            vec![1, 3],
            vec![1, 4],
            vec![1, 5],
            vec![2, 4],
            vec![2, 5],
            vec![3, 5]
        ]
    );
    assert_eq!(set(3, 1), vec![vec![1, 3, 5]]);
}

fn patient(v: usize, gap: usize) -> Patient {
    Patient {
        id: "p".into(),
        kind: PatientKind::New,
        visits_required: v,
        min_gap_days: gap,
        windows: vec![TimeWindow { lo: 0, hi: 1440 }; 7],
        service_mean: 30,
        service_dev: 0,
        revenue: vec![],
        compatibility: vec![],
        preassignment: None,
    }
}

proptest! {
    #[test]
    fn patterns_allow_one_visit_per_gap_window(v in 1usize..=4, gap in 0usize..=3, days in 1usize..=7) {
        let patterns = day_patterns(&patient(v, gap), days);
        let mut expected = 0usize;
        for mask in 0u32..(1 << days) {
            let chosen: Vec<usize> = (0..days).filter(|d| mask >> d & 1 == 1).collect();
            let ok = chosen.len() == v && (0..days).all(|s| chosen.iter().filter(|&&d| d >= s && d <= s + gap).count() <= 1);
            expected += usize::from(ok);
        }
        prop_assert_eq!(patterns.len(), expected);
        for p in &patterns {
            prop_assert_eq!(p.len(), v);
            prop_assert!(respects_gap(p, gap));
            prop_assert!(p.windows(2).all(|w| w[1].0 > w[0].0 + gap));
            prop_assert!(p.iter().all(|d| d.0 < days));
        }
    }

    #[test]
    fn clamped_budgets_fit_the_route(gp in 0u32..20, gt in 0u32..20, len in 0usize..10) {
        let (p, t) = Budgets::new(gp, gt).clamped(len);
        prop_assert!(p <= len && t <= len + 1);
        prop_assert_eq!(p, (gp as usize).min(len));
        prop_assert_eq!(t, (gt as usize).min(len + 1));
    }
}

#[test]
fn existing_visits_are_indexed_by_caregiver_and_day() {
    for seed in 0..30u64 {
        let inst = tiny_instance(seed, TinySpec::crowded(STYLES[seed as usize % 3]));
        for k in inst.caregiver_ids() {
            for d in inst.day_ids() {
                for &p in inst.existing_on(k, d) {
                    let pre = inst.patient(p).preassignment.as_ref().unwrap();
                    assert_eq!(pre.caregiver, k);
                    assert!(pre.days.contains(&d));
                    assert!(inst.compatible(p, k, d));
                }
            }
        }
        let total: usize = inst
            .existing_patients()
            .map(|p| inst.patient(p).visits_required)
            .sum();
        let indexed: usize = inst
            .caregiver_ids()
            .flat_map(|k| inst.day_ids().map(move |d| (k, d)))
            .map(|(k, d)| inst.existing_on(k, d).len())
            .sum();
        assert_eq!(total, indexed);
    }
}
