//! Worst-case start times along a fixed route.
//!
//! `label_route` runs the forward recursion over consumed deviation units:
//! `start[p][a][b]` is the latest start at position `p` when at most `a`
//! service deviations and `b` travel deviations have occurred so far.
//! `adversarial_oracle` computes the same quantities by enumerating every
//! binary delay scenario and shares no code with the recursion.

use crate::error::{Error, Result};
use crate::model::{Budgets, CaregiverId, DayId, Instance, PatientId, TimeWindow, DEPOT};

/// Where a route first breaks a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelViolation {
    /// Zero-based route position, or `None` for the return to the depot.
    pub position: Option<usize>,
    pub gamma_p: usize,
    pub gamma_t: usize,
    /// The latest allowed time that was exceeded.
    pub bound: i64,
    pub time: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RobustLabelTable {
    pub route: Vec<PatientId>,
    /// Effective service budget, clamped to the route length.
    pub gamma_p: usize,
    /// Effective travel budget, clamped to the number of arcs.
    pub gamma_t: usize,
    start: Vec<i64>,
    /// Worst-case return to the depot.
    pub ret: i64,
    pub feasible: bool,
    pub first_violation: Option<LabelViolation>,
}

impl RobustLabelTable {
    fn stride(&self) -> usize {
        (self.gamma_p + 1) * (self.gamma_t + 1)
    }

    pub fn len(&self) -> usize {
        self.route.len()
    }

    pub fn is_empty(&self) -> bool {
        self.route.is_empty()
    }

    /// Start time at zero-based `pos` with at most `a` service and `b`
    /// travel deviations consumed.
    pub fn start(&self, pos: usize, a: usize, b: usize) -> i64 {
        self.start[pos * self.stride() + a * (self.gamma_t + 1) + b]
    }

    pub fn worst_start(&self, pos: usize) -> i64 {
        self.start(pos, self.gamma_p, self.gamma_t)
    }

    pub fn nominal_start(&self, pos: usize) -> i64 {
        self.start(pos, 0, 0)
    }

    pub fn worst_starts(&self) -> Vec<i64> {
        (0..self.len()).map(|p| self.worst_start(p)).collect()
    }

    pub fn nominal_starts(&self) -> Vec<i64> {
        (0..self.len()).map(|p| self.nominal_start(p)).collect()
    }
}

/// One row of the label table, flattened as `a * (gt + 1) + b`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dims {
    pub gp: usize,
    pub gt: usize,
}

impl Dims {
    pub fn for_route(budgets: Budgets, len: usize) -> Dims {
        let (gp, gt) = budgets.clamped(len);
        Dims { gp, gt }
    }

    #[inline]
    pub fn size(self) -> usize {
        (self.gp + 1) * (self.gt + 1)
    }

    #[inline]
    pub fn idx(self, a: usize, b: usize) -> usize {
        a * (self.gt + 1) + b
    }

    #[inline]
    pub fn worst(self) -> usize {
        self.size() - 1
    }
}

/// Parameters of the leg that ends at the next visit: the previous visit's
/// service (zero for the depot) followed by the arc.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Leg {
    pub service: i64,
    pub service_dev: i64,
    pub travel: i64,
    pub travel_dev: i64,
}

/// Labels of the first visit, leaving the depot at `shift_start`.
pub(crate) fn first_row(dims: Dims, shift_start: i64, leg: Leg, release: i64, out: &mut Vec<i64>) {
    out.clear();
    for _a in 0..=dims.gp {
        for b in 0..=dims.gt {
            let extra = if b >= 1 { leg.travel_dev } else { 0 };
            out.push(release.max(shift_start + leg.travel + extra));
        }
    }
}

/// Worst arrival over the four ways of spending at most one unit of each
/// budget on the incoming leg.
#[inline]
fn arrival(dims: Dims, prev: &[i64], leg: Leg, a: usize, b: usize) -> i64 {
    let mut best = prev[dims.idx(a, b)] + leg.service + leg.travel;
    if a >= 1 {
        best = best.max(prev[dims.idx(a - 1, b)] + leg.service + leg.service_dev + leg.travel);
    }
    if b >= 1 {
        best = best.max(prev[dims.idx(a, b - 1)] + leg.service + leg.travel + leg.travel_dev);
    }
    if a >= 1 && b >= 1 {
        best = best.max(
            prev[dims.idx(a - 1, b - 1)]
                + leg.service
                + leg.service_dev
                + leg.travel
                + leg.travel_dev,
        );
    }
    best
}

pub(crate) fn next_row(dims: Dims, prev: &[i64], leg: Leg, release: i64, out: &mut Vec<i64>) {
    out.clear();
    for a in 0..=dims.gp {
        for b in 0..=dims.gt {
            out.push(release.max(arrival(dims, prev, leg, a, b)));
        }
    }
}

/// Worst-case return to the depot after the last row.
pub(crate) fn return_time(dims: Dims, last: &[i64], leg: Leg, shift_start: i64) -> i64 {
    shift_start.max(arrival(dims, last, leg, dims.gp, dims.gt))
}

pub(crate) fn leg(inst: &Instance, from: Option<PatientId>, to: usize) -> Leg {
    match from {
        None => Leg {
            service: 0,
            service_dev: 0,
            travel: inst.travel.time(DEPOT, to),
            travel_dev: inst.travel.deviation(DEPOT, to),
        },
        Some(p) => {
            let pat = inst.patient(p);
            Leg {
                service: pat.service_mean,
                service_dev: pat.service_dev,
                travel: inst.travel.time(p.loc(), to),
                travel_dev: inst.travel.deviation(p.loc(), to),
            }
        }
    }
}

fn check_route(
    route: &[PatientId],
    day: DayId,
    caregiver: CaregiverId,
    inst: &Instance,
) -> Result<TimeWindow> {
    if caregiver.0 >= inst.n_caregivers() || day.0 >= inst.n_days() {
        return Err(Error::CaregiverUnavailable { caregiver, day });
    }
    if let Some(&p) = route.iter().find(|p| p.0 >= inst.n_patients()) {
        return Err(Error::UnknownPatient(p));
    }
    inst.work_window(caregiver, day)
        .ok_or(Error::CaregiverUnavailable { caregiver, day })
}

/// Robust schedule of `route` for `caregiver` on `day`.
pub fn label_route(
    route: &[PatientId],
    day: DayId,
    caregiver: CaregiverId,
    inst: &Instance,
) -> Result<RobustLabelTable> {
    let shift = check_route(route, day, caregiver, inst)?;
    let dims = Dims::for_route(inst.budgets, route.len());
    let mut start = Vec::with_capacity(route.len() * dims.size());
    let mut row = Vec::with_capacity(dims.size());
    let mut first_violation = None;
    let mut prev: Option<PatientId> = None;
    for (pos, &p) in route.iter().enumerate() {
        let win = inst.window(p, day);
        let l = leg(inst, prev, p.loc());
        if pos == 0 {
            first_row(dims, shift.lo, l, win.lo, &mut row);
        } else {
            next_row(dims, &start[(pos - 1) * dims.size()..], l, win.lo, &mut row);
        }
        if first_violation.is_none() {
            first_violation = first_late(dims, &row, win.hi).map(|(a, b, time)| LabelViolation {
                position: Some(pos),
                gamma_p: a,
                gamma_t: b,
                bound: win.hi,
                time,
            });
        }
        start.extend_from_slice(&row);
        prev = Some(p);
    }
    let ret = match prev {
        None => shift.lo,
        Some(last) => {
            let l = leg(inst, Some(last), DEPOT);
            return_time(dims, &start[(route.len() - 1) * dims.size()..], l, shift.lo)
        }
    };
    if first_violation.is_none() && ret > shift.hi {
        first_violation = Some(LabelViolation {
            position: None,
            gamma_p: dims.gp,
            gamma_t: dims.gt,
            bound: shift.hi,
            time: ret,
        });
    }
    Ok(RobustLabelTable {
        route: route.to_vec(),
        gamma_p: dims.gp,
        gamma_t: dims.gt,
        start,
        ret,
        feasible: first_violation.is_none(),
        first_violation,
    })
}

/// Smallest budget pair (by total, then service budget) whose start exceeds `hi`.
fn first_late(dims: Dims, row: &[i64], hi: i64) -> Option<(usize, usize, i64)> {
    if row[dims.worst()] <= hi {
        return None;
    }
    let mut best: Option<(usize, usize, i64)> = None;
    for a in 0..=dims.gp {
        for b in 0..=dims.gt {
            let t = row[dims.idx(a, b)];
            if t > hi && best.is_none_or(|(ba, bb, _)| (a + b, a) < (ba + bb, ba)) {
                best = Some((a, b, t));
            }
        }
    }
    best
}

/// Per-patient worst start times and worst return over all scenarios.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub worst_start: Vec<i64>,
    pub worst_return: i64,
}

impl OracleResult {
    /// Every worst start lies inside its window and the worst return inside the shift.
    pub fn feasible(
        &self,
        route: &[PatientId],
        day: DayId,
        caregiver: CaregiverId,
        inst: &Instance,
    ) -> bool {
        let Some(shift) = inst.work_window(caregiver, day) else {
            return false;
        };
        route
            .iter()
            .zip(&self.worst_start)
            .all(|(&p, &s)| s <= inst.window(p, day).hi)
            && self.worst_return <= shift.hi
    }
}

pub const ORACLE_MAX_LEN: usize = 10;

/// Forward simulation of a single scenario. `service_late[p]` delays the
/// service at position `p`; `arc_late[a]` delays arc `a`, where arc 0 leaves
/// the depot and arc `L` returns to it. Visits wait for their window to open.
pub fn simulate_scenario(
    route: &[PatientId],
    day: DayId,
    shift_start: i64,
    service_late: &[bool],
    arc_late: &[bool],
    inst: &Instance,
) -> (Vec<i64>, i64) {
    let mut starts = Vec::with_capacity(route.len());
    let mut clock = shift_start;
    let mut here = DEPOT;
    for (pos, &p) in route.iter().enumerate() {
        let mut arc = inst.travel.time(here, p.loc());
        if arc_late[pos] {
            arc += inst.travel.deviation(here, p.loc());
        }
        let begin = (clock + arc).max(inst.window(p, day).lo);
        starts.push(begin);
        let pat = inst.patient(p);
        clock = begin
            + pat.service_mean
            + if service_late[pos] {
                pat.service_dev
            } else {
                0
            };
        here = p.loc();
    }
    let mut arc = inst.travel.time(here, DEPOT);
    if arc_late[route.len()] {
        arc += inst.travel.deviation(here, DEPOT);
    }
    let ret = if route.is_empty() {
        shift_start
    } else {
        clock + arc
    };
    (starts, ret)
}

/// Exhaustive worst case over all binary scenarios within the clamped budgets.
pub fn adversarial_oracle(
    route: &[PatientId],
    day: DayId,
    caregiver: CaregiverId,
    inst: &Instance,
) -> Result<OracleResult> {
    let shift = check_route(route, day, caregiver, inst)?;
    let len = route.len();
    if len > ORACLE_MAX_LEN {
        return Err(Error::RouteTooLong(len));
    }
    let (gp, gt) = inst.budgets.clamped(len);
    let mut worst_start = vec![i64::MIN; len];
    let mut worst_return = i64::MIN;
    let mut service_late = vec![false; len];
    let mut arc_late = vec![false; len + 1];
    for smask in 0u32..(1 << len) {
        if smask.count_ones() as usize > gp {
            continue;
        }
        for (p, flag) in service_late.iter_mut().enumerate() {
            *flag = smask & (1 << p) != 0;
        }
        for amask in 0u32..(1 << (len + 1)) {
            if amask.count_ones() as usize > gt {
                continue;
            }
            for (a, flag) in arc_late.iter_mut().enumerate() {
                *flag = amask & (1 << a) != 0;
            }
            let (starts, ret) =
                simulate_scenario(route, day, shift.lo, &service_late, &arc_late, inst);
            for (w, s) in worst_start.iter_mut().zip(starts) {
                *w = (*w).max(s);
            }
            worst_return = worst_return.max(ret);
        }
    }
    Ok(OracleResult {
        worst_start,
        worst_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::money::Cents;

    /// Two patients, 10 minutes apart from everything, 5-minute deviations.
    fn two_patient(budgets: Budgets, second_hi: i64) -> Instance {
        let n = 2;
        let mut mean = Matrix::new(n + 1);
        let mut dev = Matrix::new(n + 1);
        for a in 0..=n {
            for b in 0..=n {
                if a != b {
                    mean.set(a, b, 10);
                    dev.set(a, b, 5);
                }
            }
        }
        let patient = |id: &str, p: i64, ph: i64, hi: i64| Patient {
            id: id.into(),
            kind: PatientKind::New,
            visits_required: 1,
            min_gap_days: 0,
            windows: vec![TimeWindow::new(0, hi)],
            service_mean: p,
            service_dev: ph,
            revenue: vec![Cents(0)],
            compatibility: vec![vec![true]],
            preassignment: None,
        };
        let data = InstanceData {
            days: vec!["mon".into()],
            caregivers: vec![Caregiver {
                id: "c".into(),
                work_windows: vec![Some(TimeWindow::new(0, 1440))],
                wage_rate: Cents(50),
            }],
            patients: vec![patient("a", 30, 10, 1440), patient("b", 30, 10, second_hi)],
            travel: TravelMatrix {
                mean,
                dev,
                cost: vec![Matrix::new(n + 1)],
            },
            budgets,
            max_patients_per_caregiver_day: 8,
        };
        Instance::new(data).unwrap()
    }

    const ROUTE: [PatientId; 2] = [PatientId(0), PatientId(1)];

    #[test]
    fn two_patient_table() {
        let inst = two_patient(Budgets::new(1, 1), 1440);
        let t = label_route(&ROUTE, DayId(0), CaregiverId(0), &inst).unwrap();
        assert_eq!((t.start(0, 0, 0), t.start(0, 0, 1)), (10, 15));
        assert_eq!(
            [
                t.start(1, 0, 0),
                t.start(1, 1, 0),
                t.start(1, 0, 1),
                t.start(1, 1, 1)
            ],
            [50, 60, 55, 65]
        );
        let oracle = adversarial_oracle(&ROUTE, DayId(0), CaregiverId(0), &inst).unwrap();
        assert_eq!(oracle.worst_start, vec![15, 65]);
        assert_eq!(oracle.worst_return, t.ret);
    }

    #[test]
    fn late_window_only_breaks_under_budget() {
        let nominal = two_patient(Budgets::new(0, 0), 52);
        let t = label_route(&ROUTE, DayId(0), CaregiverId(0), &nominal).unwrap();
        assert!(t.feasible);
        assert_eq!(t.nominal_start(1), 50);

        let robust = two_patient(Budgets::new(1, 1), 52);
        let t = label_route(&ROUTE, DayId(0), CaregiverId(0), &robust).unwrap();
        assert!(!t.feasible);
        assert_eq!(t.worst_start(1), 65);
        let v = t.first_violation.unwrap();
        assert_eq!(v.position, Some(1));
        assert_eq!(v.bound, 52);
        // 55 from one travel delay already breaks the window
        assert_eq!((v.gamma_p, v.gamma_t, v.time), (0, 1, 55));
    }

    #[test]
    fn waits_for_window() {
        let mut inst = two_patient(Budgets::new(0, 0), 1440).into_data();
        inst.patients[0].windows[0] = TimeWindow::new(30, 1440);
        let inst = Instance::new(inst).unwrap();
        let t = label_route(&[PatientId(0)], DayId(0), CaregiverId(0), &inst).unwrap();
        assert_eq!(t.nominal_start(0), 30);
        assert_eq!(t.ret, 70);
    }

    #[test]
    fn empty_route_returns_at_shift_start() {
        let inst = two_patient(Budgets::new(2, 2), 1440);
        let t = label_route(&[], DayId(0), CaregiverId(0), &inst).unwrap();
        assert!(t.feasible);
        assert_eq!(t.ret, 0);
        let o = adversarial_oracle(&[], DayId(0), CaregiverId(0), &inst).unwrap();
        assert_eq!(o.worst_return, 0);
    }

    #[test]
    fn saturated_budgets_match_all_delayed_run() {
        let inst = two_patient(Budgets::new(8, 8), 1440);
        let t = label_route(&ROUTE, DayId(0), CaregiverId(0), &inst).unwrap();
        assert_eq!((t.gamma_p, t.gamma_t), (2, 3));
        let (starts, ret) = simulate_scenario(&ROUTE, DayId(0), 0, &[true; 2], &[true; 3], &inst);
        assert_eq!(t.worst_starts(), starts);
        assert_eq!(t.ret, ret);
    }
}
