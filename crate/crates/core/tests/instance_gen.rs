use rhhc_core::instance_gen::mean_patient_travel;
use rhhc_core::model::twenty_percent;
use rhhc_core::{
    generate, reject_all, Budgets, Discipline, GeneratorConfig, Region, RouteCache, TwLevel,
    UncertaintyLevel,
};

fn small(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    for seed in [1, 2, 99] {
        assert_eq!(
            generate(&small(seed)).to_json(),
            generate(&small(seed)).to_json()
        );
    }
    assert_ne!(generate(&small(1)).to_json(), generate(&small(2)).to_json());
}

#[test]
fn uncertainty_levels_set_budgets_and_keep_deviations() {
    for (level, budgets) in [
        (UncertaintyLevel::None, Budgets::new(0, 0)),
        (UncertaintyLevel::Low, Budgets::new(2, 2)),
        (UncertaintyLevel::Medium, Budgets::new(4, 4)),
        (UncertaintyLevel::High, Budgets::new(8, 8)),
    ] {
        let inst = generate(&GeneratorConfig {
            uncertainty: level,
            ..small(3)
        });
        assert_eq!(inst.budgets, budgets);
        for p in &inst.patients {
            assert_eq!(p.service_dev, twenty_percent(p.service_mean));
        }
        let n = inst.travel.mean.dim();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(
                    inst.travel.deviation(a, b),
                    twenty_percent(inst.travel.time(a, b))
                );
            }
        }
    }
}

#[test]
fn travel_times_hit_the_region_mean() {
    for region in Region::ALL {
        for seed in 1..=5 {
            let inst = generate(&GeneratorConfig {
                region,
                ..small(seed)
            });
            let mean = mean_patient_travel(&inst);
            let target = region.mean_travel_minutes();
            assert!(
                (mean - target).abs() <= 0.1 * target,
                "{region} seed {seed}: {mean}"
            );
        }
    }
}

#[test]
fn factor_levels_change_only_windows_and_budgets() {
    for discipline in Discipline::ALL {
        let base = generate(&GeneratorConfig {
            discipline,
            ..small(4)
        });
        for tw in TwLevel::ALL {
            for uncertainty in UncertaintyLevel::ALL {
                let other = generate(&GeneratorConfig {
                    discipline,
                    tw,
                    uncertainty,
                    ..small(4)
                });
                assert_eq!(other.travel.mean, base.travel.mean);
                assert_eq!(other.caregivers, base.caregivers);
                assert_eq!(other.patients.len(), base.patients.len());
                for (p, q) in other.patients.iter().zip(&base.patients) {
                    assert_eq!(
                        (&p.id, &p.preassignment, p.service_mean, &p.revenue),
                        (&q.id, &q.preassignment, q.service_mean, &q.revenue)
                    );
                }
            }
        }
    }
}

#[test]
fn windows_shrink_from_wide_to_tight() {
    for seed in 1..=5 {
        let [wide, narrow, tight] =
            TwLevel::ALL.map(|tw| generate(&GeneratorConfig { tw, ..small(seed) }));
        for i in 0..wide.patients.len() {
            for d in 0..wide.n_days() {
                let (w, n, t) = (
                    wide.patients[i].windows[d],
                    narrow.patients[i].windows[d],
                    tight.patients[i].windows[d],
                );
                assert!(
                    w.lo <= n.lo && n.hi <= w.hi,
                    "seed {seed} patient {i} day {d}"
                );
                assert!(
                    n.lo <= t.lo && t.hi <= n.hi,
                    "seed {seed} patient {i} day {d}"
                );
            }
        }
    }
}

#[test]
fn existing_schedules_survive_every_factor_level() {
    for seed in 1..=5 {
        for discipline in Discipline::ALL {
            for tw in TwLevel::ALL {
                let inst = generate(&GeneratorConfig {
                    discipline,
                    tw,
                    uncertainty: UncertaintyLevel::High,
                    ..small(seed)
                });
                assert!(
                    reject_all(&inst, &RouteCache::new()).is_ok(),
                    "seed {seed} {discipline} {tw}"
                );
            }
        }
    }
}

#[test]
fn services_follow_the_discipline() {
    for discipline in Discipline::ALL {
        let inst = generate(&GeneratorConfig {
            discipline,
            ..small(5)
        });
        let revenues: Vec<i64> = discipline
            .services()
            .iter()
            .map(|s| s.revenue().0)
            .collect();
        for p in &inst.patients {
            let service = discipline.services().iter().find(|s| {
                s.duration() == p.service_mean
                    && s.revenue().0 == p.revenue.iter().map(|r| r.0).max().unwrap()
            });
            let service = service.unwrap_or_else(|| {
                panic!(
                    "patient {} matches no {discipline} service ({revenues:?})",
                    p.id
                )
            });
            assert_eq!(p.visits_required, service.visits_per_week());
            assert_eq!(p.min_gap_days, service.min_gap_days());
        }
        assert_eq!(inst.new_patients().len(), 15);
        assert_eq!(inst.days, vec!["mon", "tue", "wed", "thu", "fri"]);
    }
}

#[test]
fn shifts_are_full_or_part_time() {
    let inst = generate(&GeneratorConfig {
        n_caregivers: 8,
        ..small(6)
    });
    for (k, c) in inst.caregivers.iter().enumerate() {
        let expected = if k % 4 == 3 { (480, 720) } else { (540, 1020) };
        for w in c.work_windows.iter().flatten() {
            assert_eq!((w.lo, w.hi), expected);
        }
    }
}
