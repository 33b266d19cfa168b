#![allow(dead_code)]

pub mod lps;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhhc_core::model::{Matrix, Preassignment, TravelMatrix};
use rhhc_core::{
    reject_all, Budgets, Caregiver, CaregiverId, Cents, DayId, Instance, InstanceData, Patient,
    PatientKind, RouteCache, TimeWindow,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Wide,
    Narrow,
    Tight,
}

pub const STYLES: [Style; 3] = [Style::Wide, Style::Narrow, Style::Tight];

#[derive(Clone, Copy, Debug)]
pub struct TinySpec {
    pub max_caregivers: usize,
    pub days: usize,
    pub max_new: usize,
    pub max_existing: usize,
    pub max_budget: u32,
    pub style: Style,
    /// Shortest expected service; short services allow instances where
    /// dropping a visit can delay the rest of a route.
    pub min_service: i64,
    /// Longest shift in minutes.
    pub max_shift: i64,
}

impl TinySpec {
    pub fn oracle(style: Style) -> Self {
        TinySpec {
            max_caregivers: 2,
            days: 2,
            max_new: 3,
            max_existing: 2,
            max_budget: 2,
            style,
            min_service: 15,
            max_shift: 300,
        }
    }

    /// Larger instances with short shifts, so caregivers compete for patients.
    pub fn crowded(style: Style) -> Self {
        TinySpec {
            max_caregivers: 3,
            days: 3,
            max_new: 6,
            max_existing: 2,
            max_budget: 2,
            style,
            min_service: 30,
            max_shift: 150,
        }
    }

    /// Short services and large travel deviations.
    pub fn erratic(style: Style) -> Self {
        TinySpec {
            min_service: 0,
            ..Self::oracle(style)
        }
    }
}

fn window(rng: &mut ChaCha8Rng, shift: TimeWindow, service: i64, style: Style) -> TimeWindow {
    let latest = (shift.hi - service).max(shift.lo);
    let t = rng.gen_range(shift.lo..=latest);
    match style {
        Style::Wide => shift,
        Style::Narrow => {
            let lo = (t - rng.gen_range(0..=60)).max(shift.lo);
            TimeWindow { lo, hi: lo + 60 }
        }
        Style::Tight => TimeWindow { lo: t, hi: t },
    }
}

/// One random instance; may have unschedulable existing visits.
pub fn raw_instance(rng: &mut ChaCha8Rng, spec: TinySpec) -> Instance {
    let n_k = rng.gen_range(1..=spec.max_caregivers);
    let n_d = spec.days;
    let n_e = rng.gen_range(0..=spec.max_existing);
    let n_new = rng.gen_range(0..=spec.max_new);
    let n = n_e + n_new;

    let caregivers: Vec<Caregiver> = (0..n_k)
        .map(|k| {
            let lo = 480 + 30 * rng.gen_range(0..=2);
            let len = rng.gen_range((spec.max_shift / 2)..=spec.max_shift);
            let work_windows = (0..n_d)
                .map(|d| (d == 0 || rng.gen_bool(0.85)).then_some(TimeWindow { lo, hi: lo + len }))
                .collect();
            Caregiver {
                id: format!("k{k}"),
                work_windows,
                wage_rate: Cents(rng.gen_range(20..=60)),
            }
        })
        .collect();

    let pos: Vec<(i64, i64)> = (0..=n)
        .map(|_| (rng.gen_range(0..=30), rng.gen_range(0..=30)))
        .collect();
    let mut mean = Matrix::new(n + 1);
    let mut dev = Matrix::new(n + 1);
    let mut cost = Matrix::new(n + 1);
    let per_minute = rng.gen_range(5..=20);
    for a in 0..=n {
        for b in 0..=n {
            if a == b {
                continue;
            }
            let dx = (pos[a].0 - pos[b].0) as f64;
            let dy = (pos[a].1 - pos[b].1) as f64;
            let t = ((dx * dx + dy * dy).sqrt().round() as i64).max(1);
            mean.set(a, b, t);
            dev.set(
                a,
                b,
                if spec.min_service == 0 {
                    rng.gen_range(0..=2 * t)
                } else {
                    rng.gen_range(0..=t / 2 + 1)
                },
            );
            cost.set(a, b, Cents(t * per_minute));
        }
    }

    let mut patients = Vec::with_capacity(n);
    for i in 0..n {
        let existing = i < n_e;
        let service_mean = rng.gen_range(spec.min_service..=60);
        let service_dev = rng.gen_range(0..=service_mean / 3);
        let revenue = (0..n_k)
            .map(|_| Cents(rng.gen_range(1500..=9000)))
            .collect();
        let (kind, visits, gap, pre, compatibility, windows) = if existing {
            let k = rng.gen_range(0..n_k);
            let days: Vec<usize> = (0..n_d)
                .filter(|&d| caregivers[k].work_windows[d].is_some())
                .collect();
            let visits = rng.gen_range(1..=days.len());
            let mut chosen: Vec<usize> = days.clone();
            while chosen.len() > visits {
                chosen.remove(rng.gen_range(0..chosen.len()));
            }
            let compat = (0..n_k)
                .map(|c| (0..n_d).map(|_| c == k).collect())
                .collect();
            let windows = (0..n_d)
                .map(|d| match caregivers[k].work_windows[d] {
                    Some(shift) if chosen.contains(&d) => {
                        window(rng, shift, service_mean, spec.style)
                    }
                    Some(shift) => shift,
                    None => TimeWindow { lo: 0, hi: 1440 },
                })
                .collect();
            let pre = Preassignment {
                caregiver: CaregiverId(k),
                days: chosen.into_iter().map(DayId).collect(),
            };
            (PatientKind::Existing, visits, 0, Some(pre), compat, windows)
        } else {
            let visits = rng.gen_range(1..=n_d.min(2));
            let gap = if visits == 1 { rng.gen_range(0..=1) } else { 0 };
            let compat = (0..n_k)
                .map(|_| (0..n_d).map(|_| rng.gen_bool(0.85)).collect())
                .collect();
            let span = TimeWindow { lo: 480, hi: 840 };
            let windows = (0..n_d)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        span
                    } else {
                        window(rng, span, service_mean, spec.style)
                    }
                })
                .collect();
            (PatientKind::New, visits, gap, None, compat, windows)
        };
        patients.push(Patient {
            id: format!("{}{i}", if existing { "e" } else { "n" }),
            kind,
            visits_required: visits,
            min_gap_days: gap,
            windows,
            service_mean,
            service_dev,
            revenue,
            compatibility,
            preassignment: pre,
        });
    }

    let budgets = Budgets::new(
        rng.gen_range(0..=spec.max_budget),
        rng.gen_range(0..=spec.max_budget),
    );
    let data = InstanceData {
        days: (0..n_d).map(|d| format!("d{d}")).collect(),
        caregivers,
        patients,
        travel: TravelMatrix {
            mean,
            dev,
            cost: vec![cost; n_d],
        },
        budgets,
        max_patients_per_caregiver_day: 6,
    };
    Instance::new(data).expect("tiny instance validates")
}

/// Random instance whose existing visits are robustly schedulable.
pub fn tiny_instance(seed: u64, spec: TinySpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = raw_instance(&mut rng, spec);
        if reject_all(&inst, &RouteCache::new()).is_ok() {
            return inst;
        }
    }
}

/// Single-day instance on a line: the depot at 0 and one patient per entry
/// of `pos` with the given windows.
pub fn line_instance(pos: &[i64], windows: &[TimeWindow], budgets: Budgets) -> Instance {
    let n = pos.len();
    let mut locs = vec![0];
    locs.extend_from_slice(pos);
    let mut mean = Matrix::new(n + 1);
    let mut dev = Matrix::new(n + 1);
    let mut cost = Matrix::new(n + 1);
    for a in 0..=n {
        for b in 0..=n {
            let t = (locs[a] - locs[b]).abs();
            mean.set(a, b, t);
            dev.set(a, b, t / 5);
            cost.set(a, b, Cents(10 * t));
        }
    }
    let patients = (0..n)
        .map(|i| Patient {
            id: format!("p{i}"),
            kind: PatientKind::New,
            visits_required: 1,
            min_gap_days: 0,
            windows: vec![windows[i]],
            service_mean: 30,
            service_dev: 6,
            revenue: vec![Cents(10_000)],
            compatibility: vec![vec![true]],
            preassignment: None,
        })
        .collect();
    let data = InstanceData {
        days: vec!["mon".into()],
        caregivers: vec![Caregiver {
            id: "k0".into(),
            work_windows: vec![Some(TimeWindow { lo: 480, hi: 1020 })],
            wage_rate: Cents(50),
        }],
        patients,
        travel: TravelMatrix {
            mean,
            dev,
            cost: vec![cost],
        },
        budgets,
        max_patients_per_caregiver_day: 8,
    };
    Instance::new(data).expect("line instance validates")
}

/// One caregiver, one day and `n` new patients with random windows and
/// deviations, for route-level checks.
pub fn route_instance(seed: u64, n: usize, budgets: Budgets) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = TimeWindow {
        lo: 480,
        hi: 480 + rng.gen_range(120..=480),
    };
    let pos: Vec<(i64, i64)> = (0..=n)
        .map(|_| (rng.gen_range(0..=40), rng.gen_range(0..=40)))
        .collect();
    let mut mean = Matrix::new(n + 1);
    let mut dev = Matrix::new(n + 1);
    let mut cost = Matrix::new(n + 1);
    for a in 0..=n {
        for b in 0..=n {
            if a == b {
                continue;
            }
            let dx = (pos[a].0 - pos[b].0) as f64;
            let dy = (pos[a].1 - pos[b].1) as f64;
            let t = (dx * dx + dy * dy).sqrt().round() as i64;
            mean.set(a, b, t);
            dev.set(a, b, rng.gen_range(0..=t));
            cost.set(a, b, Cents(rng.gen_range(0..=3 * t + 5)));
        }
    }
    let patients = (0..n)
        .map(|i| {
            let service_mean = rng.gen_range(0..=45);
            let lo = rng.gen_range(shift.lo..shift.hi);
            let windows = vec![match rng.gen_range(0..4) {
                0 => shift,
                1 => TimeWindow { lo, hi: lo },
                _ => TimeWindow {
                    lo,
                    hi: (lo + rng.gen_range(0..=120)).min(shift.hi),
                },
            }];
            Patient {
                id: format!("p{i}"),
                kind: PatientKind::New,
                visits_required: 1,
                min_gap_days: 0,
                windows,
                service_mean,
                service_dev: rng.gen_range(0..=service_mean / 2 + 5),
                revenue: vec![Cents(rng.gen_range(1000..=9000))],
                compatibility: vec![vec![true]],
                preassignment: None,
            }
        })
        .collect();
    let data = InstanceData {
        days: vec!["mon".into()],
        caregivers: vec![Caregiver {
            id: "k0".into(),
            work_windows: vec![Some(shift)],
            wage_rate: Cents(rng.gen_range(0..=80)),
        }],
        patients,
        travel: TravelMatrix {
            mean,
            dev,
            cost: vec![cost],
        },
        budgets,
        max_patients_per_caregiver_day: 8,
    };
    Instance::new(data).expect("route instance validates")
}
