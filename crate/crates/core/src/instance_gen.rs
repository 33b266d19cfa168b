//! Synthetic instances following the case-study factor design.
//!
//! Patients are uniform points in a square with the depot at its centre;
//! travel times are Euclidean and rescaled so the mean over patient pairs
//! hits the region's target. The random stream does not depend on the
//! window level or the uncertainty level, so a seed yields the same patients,
//! assignments and appointment times across a factor grid, and only the
//! windows and budgets change. Those change in a nested way: every Tight
//! window lies inside the Narrow one, which lies inside the Wide one.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::{
    day_patterns, twenty_percent, Caregiver, CaregiverId, DayId, Instance, InstanceData, Matrix,
    Patient, PatientKind, Preassignment, TimeWindow, TravelMatrix, UncertaintyLevel,
};
use crate::money::Cents;

const FULL_TIME: TimeWindow = TimeWindow {
    lo: 9 * 60,
    hi: 17 * 60,
};
const PART_TIME: TimeWindow = TimeWindow {
    lo: 8 * 60,
    hi: 12 * 60,
};
const NOON: i64 = 12 * 60;
const NARROW_WIDTH: i64 = 60;
const BILLING_CENTS_PER_HOUR: i64 = 10_200;
const MILEAGE_CENTS_PER_MILE: f64 = 56.0;
const KM_PER_MILE: f64 = 1.609_344;
/// Mean distance between two uniform points in the unit square.
const UNIT_SQUARE_MEAN_DISTANCE: f64 = 0.521_405;
const PLACEMENT_ATTEMPTS: usize = 50;
const DAY_NAMES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    T20,
    T60,
}

impl Region {
    pub const ALL: [Region; 2] = [Region::T20, Region::T60];

    /// Mean travel time between two patients, minutes.
    pub fn mean_travel_minutes(self) -> f64 {
        match self {
            Region::T20 => 20.0,
            Region::T60 => 60.0,
        }
    }

    /// Mean distance between two patients, km.
    pub fn mean_distance_km(self) -> f64 {
        match self {
            Region::T20 => 22.60,
            Region::T60 => 74.69,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::T20 => "t20",
            Region::T60 => "t60",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Discipline {
    Nursing,
    PhysicalTherapy,
}

impl Discipline {
    pub const ALL: [Discipline; 2] = [Discipline::Nursing, Discipline::PhysicalTherapy];

    /// Services ordered from most to least qualified.
    pub fn services(self) -> &'static [Service] {
        match self {
            Discipline::Nursing => &[Service::Rn, Service::Sn, Service::Lpn],
            Discipline::PhysicalTherapy => &[Service::Pt, Service::Pta],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Discipline::Nursing => "nursing",
            Discipline::PhysicalTherapy => "pt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TwLevel {
    /// AM, PM or whole-shift windows.
    Wide,
    /// One-hour windows.
    Narrow,
    /// Exact appointment times.
    Tight,
}

impl TwLevel {
    pub const ALL: [TwLevel; 3] = [TwLevel::Wide, TwLevel::Narrow, TwLevel::Tight];

    pub fn name(self) -> &'static str {
        match self {
            TwLevel::Wide => "wide",
            TwLevel::Narrow => "narrow",
            TwLevel::Tight => "tight",
        }
    }
}

macro_rules! named_from_str {
    ($ty:ident, $what:literal, $($alias:literal => $variant:ident),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self, Error> {
                match s.to_ascii_lowercase().as_str() {
                    $($alias => Ok($ty::$variant),)+
                    _ => Err(Error::Parse(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_from_str!(Region, "region", "t20" => T20, "t60" => T60);
named_from_str!(Discipline, "discipline", "nursing" => Nursing, "pt" => PhysicalTherapy, "physical-therapy" => PhysicalTherapy);
named_from_str!(TwLevel, "time-window level", "wide" => Wide, "narrow" => Narrow, "tight" => Tight);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Service {
    Sn,
    Rn,
    Lpn,
    Pta,
    Pt,
}

impl Service {
    pub fn visits_per_week(self) -> usize {
        match self {
            Service::Pta => 2,
            _ => 1,
        }
    }

    pub fn duration(self) -> i64 {
        match self {
            Service::Rn | Service::Pt => 55,
            _ => 50,
        }
    }

    pub fn hourly_wage_cents(self) -> i64 {
        match self {
            Service::Sn | Service::Lpn => 2686,
            Service::Rn => 4280,
            Service::Pta => 3101,
            Service::Pt => 4710,
        }
    }

    pub fn min_gap_days(self) -> usize {
        match self {
            Service::Rn => 1,
            _ => 0,
        }
    }

    /// Revenue per visit: the hourly billing rate over the expected
    /// duration, discounted for assistant-level services and raised for
    /// physical therapy.
    pub fn revenue(self) -> Cents {
        let percent = match self {
            Service::Rn => 100,
            Service::Pt => 110,
            Service::Sn | Service::Lpn | Service::Pta => 90,
        };
        let num = BILLING_CENTS_PER_HOUR * percent * self.duration();
        Cents((num + 3000) / 6000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub region: Region,
    pub discipline: Discipline,
    pub tw: TwLevel,
    pub uncertainty: UncertaintyLevel,
    pub n_existing: usize,
    pub n_new_per_day: usize,
    pub n_caregivers: usize,
    pub n_days: usize,
    /// Every `part_time_every`-th caregiver works part time; 0 disables.
    pub part_time_every: usize,
    pub max_patients_per_caregiver_day: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            region: Region::T20,
            discipline: Discipline::Nursing,
            tw: TwLevel::Wide,
            uncertainty: UncertaintyLevel::None,
            n_existing: 20,
            n_new_per_day: 3,
            n_caregivers: 3,
            n_days: 5,
            part_time_every: 4,
            max_patients_per_caregiver_day: 8,
            seed: 1,
        }
    }
}

struct Visit {
    patient: usize,
    appointment: i64,
}

struct Windows {
    wide: TimeWindow,
    narrow: TimeWindow,
    tight: TimeWindow,
}

impl Windows {
    fn pick(&self, tw: TwLevel) -> TimeWindow {
        match tw {
            TwLevel::Wide => self.wide,
            TwLevel::Narrow => self.narrow,
            TwLevel::Tight => self.tight,
        }
    }
}

fn nested_windows(appointment: i64, shift: TimeWindow, category: u8, offset: i64) -> Windows {
    let wide = match category {
        0 | 1 if appointment <= NOON || shift.hi <= NOON => TimeWindow {
            lo: shift.lo,
            hi: shift.hi.min(NOON),
        },
        0 | 1 => TimeWindow {
            lo: NOON.max(shift.lo),
            hi: shift.hi,
        },
        _ => shift,
    };
    let narrow = if wide.width() <= NARROW_WIDTH {
        wide
    } else {
        let lo = (appointment - offset).clamp(wide.lo, wide.hi - NARROW_WIDTH);
        TimeWindow {
            lo,
            hi: lo + NARROW_WIDTH,
        }
    };
    Windows {
        wide,
        narrow,
        tight: TimeWindow {
            lo: appointment,
            hi: appointment,
        },
    }
}

fn day_name(d: usize, n_days: usize) -> String {
    if n_days <= DAY_NAMES.len() {
        DAY_NAMES[d].to_string()
    } else {
        format!("d{}", d + 1)
    }
}

/// Builds an instance. Deterministic in `config`; never fails for sane
/// sizes (existing patients that cannot be placed after repeated draws are
/// dropped with a warning).
pub fn generate(config: &GeneratorConfig) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let services = config.discipline.services();
    let n_days = config.n_days;
    let n_k = config.n_caregivers;
    let n_new = config.n_new_per_day * n_days;
    let n_cand = config.n_existing + n_new;

    // caregivers cycle through the qualification levels
    let qualification: Vec<usize> = (0..n_k).map(|k| k % services.len()).collect();
    let shifts: Vec<TimeWindow> = (0..n_k)
        .map(|k| {
            if config.part_time_every > 0
                && k % config.part_time_every == config.part_time_every - 1
            {
                PART_TIME
            } else {
                FULL_TIME
            }
        })
        .collect();

    let points: Vec<(f64, f64)> = (0..n_cand)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    let service_of: Vec<usize> = (0..n_cand)
        .map(|_| rng.gen_range(0..services.len()))
        .collect();

    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for a in 0..n_cand {
        for b in a + 1..n_cand {
            pair_sum += dist(points[a], points[b]);
            pairs += 1;
        }
    }
    let mean_dist = if pairs > 0 && pair_sum > 0.0 {
        pair_sum / pairs as f64
    } else {
        UNIT_SQUARE_MEAN_DISTANCE
    };
    let minutes_per_unit = config.region.mean_travel_minutes() / mean_dist;
    let km_per_minute = config.region.mean_distance_km() / config.region.mean_travel_minutes();
    let depot = (0.5, 0.5);
    let loc = |c: Option<usize>| c.map_or(depot, |i| points[i]);
    let minutes = |a: Option<usize>, b: Option<usize>| -> i64 {
        let d = dist(loc(a), loc(b));
        if d == 0.0 {
            0
        } else {
            ((d * minutes_per_unit).round() as i64).max(1)
        }
    };
    let worst_leg = |a: Option<usize>, b: Option<usize>| {
        let t = minutes(a, b);
        t + twenty_percent(t)
    };
    let worst_service = |c: usize| {
        let p = services[service_of[c]].duration();
        p + twenty_percent(p)
    };

    // place existing patients: caregiver, days, appointment times
    let mut schedule: Vec<Vec<Vec<Visit>>> = (0..n_k)
        .map(|_| (0..n_days).map(|_| Vec::new()).collect())
        .collect();
    let mut placed: Vec<(usize, CaregiverId, Vec<DayId>)> = Vec::new();
    let mut windows: Vec<Vec<Option<Windows>>> = (0..n_cand)
        .map(|_| (0..n_days).map(|_| None).collect())
        .collect();
    for c in 0..config.n_existing {
        let svc = service_of[c];
        let able: Vec<usize> = (0..n_k).filter(|&k| qualification[k] <= svc).collect();
        let probe = Patient {
            id: String::new(),
            kind: PatientKind::Existing,
            visits_required: services[svc].visits_per_week(),
            min_gap_days: services[svc].min_gap_days(),
            windows: Vec::new(),
            service_mean: 0,
            service_dev: 0,
            revenue: Vec::new(),
            compatibility: Vec::new(),
            preassignment: None,
        };
        let patterns = day_patterns(&probe, n_days);
        if able.is_empty() || patterns.is_empty() {
            log::warn!("existing patient {c} has no qualified caregiver or day pattern; dropped");
            continue;
        }
        let mut done = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let k = *able.choose(&mut rng).expect("nonempty");
            let pattern = patterns.choose(&mut rng).expect("nonempty").clone();
            let shift = shifts[k];
            let latest = shift.hi - services[svc].duration();
            let draws: Vec<(i64, u8, i64)> = pattern
                .iter()
                .map(|_| {
                    (
                        rng.gen_range(shift.lo..=latest),
                        rng.gen_range(0..3u8),
                        rng.gen_range(0..=NARROW_WIDTH),
                    )
                })
                .collect();
            let fits = pattern.iter().zip(&draws).all(|(d, &(t, _, _))| {
                let day = &schedule[k][d.0];
                if day.len() >= config.max_patients_per_caregiver_day {
                    return false;
                }
                let mut order: Vec<(usize, i64)> =
                    day.iter().map(|v| (v.patient, v.appointment)).collect();
                order.push((c, t));
                order.sort_by_key(|&(p, t)| (t, p));
                chain_fits(&order, shift, &worst_leg, &worst_service)
            });
            if !fits {
                continue;
            }
            for (d, &(t, category, offset)) in pattern.iter().zip(&draws) {
                schedule[k][d.0].push(Visit {
                    patient: c,
                    appointment: t,
                });
                windows[c][d.0] = Some(nested_windows(t, shift, category, offset));
            }
            placed.push((c, CaregiverId(k), pattern));
            done = true;
            break;
        }
        if !done {
            log::warn!("existing patient {c} could not be placed after {PLACEMENT_ATTEMPTS} attempts; dropped");
        }
    }

    // candidate index -> final location order: existing first, then new
    let mut kept: Vec<usize> = placed.iter().map(|p| p.0).collect();
    kept.extend(config.n_existing..n_cand);

    let days: Vec<String> = (0..n_days).map(|d| day_name(d, n_days)).collect();
    let caregivers: Vec<Caregiver> = (0..n_k)
        .map(|k| Caregiver {
            id: format!("c{:02}", k + 1),
            work_windows: vec![Some(shifts[k]); n_days],
            wage_rate: Cents((services[qualification[k]].hourly_wage_cents() + 30) / 60),
        })
        .collect();
    let span = TimeWindow {
        lo: shifts.iter().map(|s| s.lo).min().unwrap_or(FULL_TIME.lo),
        hi: shifts.iter().map(|s| s.hi).max().unwrap_or(FULL_TIME.hi),
    };

    let mut patients = Vec::with_capacity(kept.len());
    for (pos, &c) in kept.iter().enumerate() {
        let svc = services[service_of[c]];
        let able: Vec<bool> = (0..n_k)
            .map(|k| qualification[k] <= service_of[c])
            .collect();
        let existing = placed.get(pos);
        let (id, kind, pre, wins) = match existing {
            Some((_, k, pattern)) => {
                let wins = (0..n_days)
                    .map(|d| {
                        windows[c][d]
                            .as_ref()
                            .map_or(shifts[k.0], |w| w.pick(config.tw))
                    })
                    .collect();
                (
                    format!("e{:02}", pos + 1),
                    PatientKind::Existing,
                    Some(Preassignment {
                        caregiver: *k,
                        days: pattern.clone(),
                    }),
                    wins,
                )
            }
            None => (
                format!("n{:02}", pos + 1 - placed.len()),
                PatientKind::New,
                None,
                vec![span; n_days],
            ),
        };
        patients.push(Patient {
            id,
            kind,
            visits_required: svc.visits_per_week(),
            min_gap_days: svc.min_gap_days(),
            windows: wins,
            service_mean: svc.duration(),
            service_dev: twenty_percent(svc.duration()),
            revenue: vec![svc.revenue(); n_k],
            compatibility: able.iter().map(|&a| vec![a; n_days]).collect(),
            preassignment: pre,
        });
    }

    let n_loc = kept.len() + 1;
    let cand_of = |l: usize| if l == 0 { None } else { Some(kept[l - 1]) };
    let mut mean = Matrix::new(n_loc);
    let mut dev = Matrix::new(n_loc);
    let mut cost = Matrix::new(n_loc);
    for a in 0..n_loc {
        for b in 0..n_loc {
            let t = minutes(cand_of(a), cand_of(b));
            mean.set(a, b, t);
            dev.set(a, b, twenty_percent(t));
            let miles = t as f64 * km_per_minute / KM_PER_MILE;
            cost.set(a, b, Cents((miles * MILEAGE_CENTS_PER_MILE).round() as i64));
        }
    }
    let data = InstanceData {
        days,
        caregivers,
        patients,
        travel: TravelMatrix {
            mean,
            dev,
            cost: vec![cost; n_days],
        },
        budgets: config.uncertainty.budgets(),
        max_patients_per_caregiver_day: config.max_patients_per_caregiver_day,
    };
    Instance::new(data).expect("generated instances validate")
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Appointments in `order` can be kept even if every service and every leg
/// runs at its maximum duration.
fn chain_fits(
    order: &[(usize, i64)],
    shift: TimeWindow,
    worst_leg: &impl Fn(Option<usize>, Option<usize>) -> i64,
    worst_service: &impl Fn(usize) -> i64,
) -> bool {
    let mut free_at = shift.lo;
    let mut here = None;
    for &(p, t) in order {
        if free_at + worst_leg(here, Some(p)) > t {
            return false;
        }
        free_at = t + worst_service(p);
        here = Some(p);
    }
    free_at + worst_leg(here, None) <= shift.hi
}

/// Mean travel time over distinct patient pairs.
pub fn mean_patient_travel(inst: &Instance) -> f64 {
    let n = inst.n_patients();
    let mut sum = 0i64;
    let mut pairs = 0i64;
    for a in 1..=n {
        for b in 1..=n {
            if a != b {
                sum += inst.travel.time(a, b);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum as f64 / pairs as f64
    }
}
