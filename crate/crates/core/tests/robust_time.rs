mod common;

use common::route_instance;
use proptest::prelude::*;
use rhhc_core::model::DEPOT;
use rhhc_core::{
    adversarial_oracle, label_route, Budgets, CaregiverId, DayId, Instance, PatientId,
};

const K: CaregiverId = CaregiverId(0);
const D: DayId = DayId(0);

/// Scenario enumeration written independently of the library: every subset
/// of delayed services and legs within the clamped budgets.
fn brute_force(route: &[PatientId], inst: &Instance) -> (Vec<i64>, i64) {
    let shift = inst.work_window(K, D).unwrap();
    let len = route.len();
    let gp = (inst.budgets.gamma_p as usize).min(len);
    let gt = (inst.budgets.gamma_t as usize).min(len + 1);
    let mut worst = vec![i64::MIN; len];
    let mut worst_ret = i64::MIN;
    for s in 0u32..(1 << len) {
        if s.count_ones() as usize > gp {
            continue;
        }
        for a in 0u32..(1 << (len + 1)) {
            if a.count_ones() as usize > gt {
                continue;
            }
            let mut t = shift.lo;
            let mut at = DEPOT;
            for (i, &p) in route.iter().enumerate() {
                let leg = inst.travel.mean.get(at, p.0 + 1)
                    + if a >> i & 1 == 1 {
                        inst.travel.dev.get(at, p.0 + 1)
                    } else {
                        0
                    };
                let start = (t + leg).max(inst.patients[p.0].windows[0].lo);
                worst[i] = worst[i].max(start);
                let pat = &inst.patients[p.0];
                t = start + pat.service_mean + if s >> i & 1 == 1 { pat.service_dev } else { 0 };
                at = p.0 + 1;
            }
            let ret = if len == 0 {
                shift.lo
            } else {
                t + inst.travel.mean.get(at, DEPOT)
                    + if a >> len & 1 == 1 {
                        inst.travel.dev.get(at, DEPOT)
                    } else {
                        0
                    }
            };
            worst_ret = worst_ret.max(ret);
        }
    }
    (worst, worst_ret)
}

fn route_of(order: &[usize], n: usize) -> Vec<PatientId> {
    order
        .iter()
        .filter(|&&i| i < n)
        .map(|&i| PatientId(i))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn labels_match_scenario_enumeration(
        seed in 0u64..10_000,
        n in 0usize..=6,
        gp in 0u32..=3,
        gt in 0u32..=3,
        order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let inst = route_instance(seed, n, Budgets::new(gp, gt));
        let route = route_of(&order, n);
        let table = label_route(&route, D, K, &inst).unwrap();
        let (worst, ret) = brute_force(&route, &inst);
        prop_assert_eq!(table.worst_starts(), worst.clone());
        prop_assert_eq!(table.ret, ret);
        let oracle = adversarial_oracle(&route, D, K, &inst).unwrap();
        prop_assert_eq!(&oracle.worst_start, &worst);
        prop_assert_eq!(oracle.worst_return, ret);
        let shift = inst.work_window(K, D).unwrap();
        let fits = route.iter().zip(&worst).all(|(p, &s)| s <= inst.patients[p.0].windows[0].hi) && ret <= shift.hi;
        prop_assert_eq!(table.feasible, fits);
        prop_assert_eq!(table.first_violation.is_none(), fits);
    }

    #[test]
    fn starts_grow_with_consumed_budget(seed in 0u64..10_000, n in 1usize..=6, gp in 0u32..=4, gt in 0u32..=4) {
        let inst = route_instance(seed, n, Budgets::new(gp, gt));
        let route: Vec<PatientId> = (0..n).map(PatientId).collect();
        let table = label_route(&route, D, K, &inst).unwrap();
        for pos in 0..n {
            for a in 0..=table.gamma_p {
                for b in 0..=table.gamma_t {
                    if a > 0 {
                        prop_assert!(table.start(pos, a, b) >= table.start(pos, a - 1, b));
                    }
                    if b > 0 {
                        prop_assert!(table.start(pos, a, b) >= table.start(pos, a, b - 1));
                    }
                }
            }
        }
        let nominal = label_route(&route, D, K, &inst.with_budgets(Budgets::new(0, 0))).unwrap();
        prop_assert_eq!(table.nominal_starts(), nominal.worst_starts());
    }

    #[test]
    fn larger_budgets_never_help(seed in 0u64..10_000, n in 1usize..=6, gp in 0u32..=3, gt in 0u32..=3, extra_p in 0u32..=2, extra_t in 0u32..=2) {
        let inst = route_instance(seed, n, Budgets::new(gp, gt));
        let bigger = inst.with_budgets(Budgets::new(gp + extra_p, gt + extra_t));
        let route: Vec<PatientId> = (0..n).map(PatientId).collect();
        let small = label_route(&route, D, K, &inst).unwrap();
        let large = label_route(&route, D, K, &bigger).unwrap();
        prop_assert!(large.ret >= small.ret);
        for pos in 0..n {
            prop_assert!(large.worst_start(pos) >= small.worst_start(pos));
        }
        prop_assert!(small.feasible || !large.feasible);
    }

    #[test]
    fn saturated_budgets_are_the_all_late_run(seed in 0u64..10_000, n in 0usize..=6, over in 0u32..=3) {
        let inst = route_instance(seed, n, Budgets::new(n as u32 + over, n as u32 + 1 + over));
        let route: Vec<PatientId> = (0..n).map(PatientId).collect();
        let table = label_route(&route, D, K, &inst).unwrap();
        let shift = inst.work_window(K, D).unwrap();
        let mut t = shift.lo;
        let mut at = DEPOT;
        let mut starts = Vec::new();
        for &p in &route {
            let start = (t + inst.travel.mean.get(at, p.0 + 1) + inst.travel.dev.get(at, p.0 + 1)).max(inst.patients[p.0].windows[0].lo);
            starts.push(start);
            t = start + inst.patients[p.0].service_mean + inst.patients[p.0].service_dev;
            at = p.0 + 1;
        }
        let ret = if n == 0 { shift.lo } else { t + inst.travel.mean.get(at, DEPOT) + inst.travel.dev.get(at, DEPOT) };
        prop_assert_eq!(table.worst_starts(), starts);
        prop_assert_eq!(table.ret, ret);
    }

    #[test]
    fn feasibility_is_inherited_by_prefixes(seed in 0u64..10_000, n in 1usize..=6, gp in 0u32..=3, gt in 0u32..=3) {
        let inst = route_instance(seed, n, Budgets::new(gp, gt));
        let route: Vec<PatientId> = (0..n).map(PatientId).collect();
        if label_route(&route, D, K, &inst).unwrap().feasible {
            for cut in 0..n {
                let table = label_route(&route[..cut], D, K, &inst).unwrap();
                for pos in 0..cut {
                    prop_assert!(table.worst_start(pos) <= inst.patients[pos].windows[0].hi);
                }
            }
        }
    }
}

#[test]
fn oracle_refuses_long_routes() {
    let inst = route_instance(1, 11, Budgets::new(1, 1));
    let route: Vec<PatientId> = (0..11).map(PatientId).collect();
    assert!(adversarial_oracle(&route, D, K, &inst).is_err());
}
