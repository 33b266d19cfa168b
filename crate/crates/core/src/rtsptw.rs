//! Exact robust TSP with time windows and wage cost for one caregiver-day.
//!
//! Depth-first branch and bound over visit orders. Children are tried in
//! ascending patient order and only strictly cheaper routes replace the
//! incumbent, so among equal-cost optima the lexicographically smallest
//! sequence wins.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::model::{CaregiverId, DayId, Instance, PatientId, DEPOT};
use crate::money::Cents;
use crate::robust_time::{
    first_row, label_route, leg, next_row, return_time, Dims, RobustLabelTable,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutedDay {
    pub caregiver: CaregiverId,
    pub day: DayId,
    pub route: Vec<PatientId>,
    pub labels: RobustLabelTable,
    pub travel_cost: Cents,
    pub wage_cost: Cents,
    pub revenue: Cents,
    /// Sorted patient set of the route.
    pub covered: Vec<PatientId>,
}

impl RoutedDay {
    /// Revenue minus travel and wage cost.
    pub fn value(&self) -> Cents {
        self.revenue - self.travel_cost - self.wage_cost
    }

    pub fn cost(&self) -> Cents {
        self.travel_cost + self.wage_cost
    }

    pub fn visits(&self, p: PatientId) -> bool {
        self.covered.binary_search(&p).is_ok()
    }

    /// Evaluates a given visit order. Returns `None` if it is not robustly feasible.
    pub fn from_order(
        route: &[PatientId],
        day: DayId,
        caregiver: CaregiverId,
        inst: &Instance,
    ) -> Result<Option<RoutedDay>> {
        let labels = label_route(route, day, caregiver, inst)?;
        if !labels.feasible {
            return Ok(None);
        }
        Ok(Some(Self::from_labels(labels, day, caregiver, inst)))
    }

    fn from_labels(
        labels: RobustLabelTable,
        day: DayId,
        caregiver: CaregiverId,
        inst: &Instance,
    ) -> RoutedDay {
        let route = labels.route.clone();
        let travel_cost = route_travel_cost(&route, day, inst);
        let shift = inst
            .work_window(caregiver, day)
            .expect("labelled routes have a shift");
        let wage_cost = inst.caregiver(caregiver).wage_rate * (labels.ret - shift.lo);
        let revenue = route.iter().map(|&p| inst.revenue(caregiver, p)).sum();
        let mut covered = route.clone();
        covered.sort();
        RoutedDay {
            caregiver,
            day,
            route,
            labels,
            travel_cost,
            wage_cost,
            revenue,
            covered,
        }
    }
}

pub fn route_travel_cost(route: &[PatientId], day: DayId, inst: &Instance) -> Cents {
    if route.is_empty() {
        return Cents::ZERO;
    }
    let mut total = Cents::ZERO;
    let mut here = DEPOT;
    for p in route {
        total += inst.travel.cost(day, here, p.loc());
        here = p.loc();
    }
    total + inst.travel.cost(day, here, DEPOT)
}

/// Cheapest robustly feasible visit order of `patients`, or `None`.
pub fn solve_rtsptw(
    patients: &[PatientId],
    day: DayId,
    caregiver: CaregiverId,
    inst: &Instance,
) -> Result<Option<RoutedDay>> {
    let mut set = patients.to_vec();
    set.sort();
    set.dedup();
    if set.len() > inst.max_per_day() {
        return Err(Error::TooManyPatients {
            count: set.len(),
            limit: inst.max_per_day(),
        });
    }
    if inst.work_window(caregiver, day).is_none() {
        return Err(Error::CaregiverUnavailable { caregiver, day });
    }
    for &p in &set {
        if p.0 >= inst.n_patients() {
            return Err(Error::UnknownPatient(p));
        }
        if !inst.compatible(p, caregiver, day) {
            return Err(Error::IncompatiblePatient {
                patient: p,
                caregiver,
                day,
            });
        }
    }
    let mut search = Search::new(&set, day, caregiver, inst);
    search.run();
    match search.best_order {
        None => Ok(None),
        Some(order) => RoutedDay::from_order(&order, day, caregiver, inst),
    }
}

struct Search<'a> {
    inst: &'a Instance,
    day: DayId,
    set: Vec<PatientId>,
    dims: Dims,
    shift_lo: i64,
    shift_hi: i64,
    wage: i64,
    /// Location index per set member, depot last.
    locs: Vec<usize>,
    service: Vec<i64>,
    release: Vec<i64>,
    deadline: Vec<i64>,
    rows: Vec<Vec<i64>>,
    path: Vec<usize>,
    best_cost: i64,
    best_order: Option<Vec<PatientId>>,
}

impl<'a> Search<'a> {
    fn new(set: &[PatientId], day: DayId, caregiver: CaregiverId, inst: &'a Instance) -> Self {
        let shift = inst.work_window(caregiver, day).expect("checked by caller");
        let mut locs: Vec<usize> = set.iter().map(|p| p.loc()).collect();
        locs.push(DEPOT);
        Search {
            inst,
            day,
            set: set.to_vec(),
            dims: Dims::for_route(inst.budgets, set.len()),
            shift_lo: shift.lo,
            shift_hi: shift.hi,
            wage: inst.caregiver(caregiver).wage_rate.0,
            locs,
            service: set.iter().map(|&p| inst.patient(p).service_mean).collect(),
            release: set.iter().map(|&p| inst.window(p, day).lo).collect(),
            deadline: set.iter().map(|&p| inst.window(p, day).hi).collect(),
            rows: vec![Vec::new(); set.len()],
            path: Vec::with_capacity(set.len()),
            best_cost: i64::MAX,
            best_order: None,
        }
    }

    fn time(&self, a: usize, b: usize) -> i64 {
        self.inst.travel.time(self.locs[a], self.locs[b])
    }

    fn cost(&self, a: usize, b: usize) -> i64 {
        self.inst
            .travel
            .cost(self.day, self.locs[a], self.locs[b])
            .0
    }

    fn run(&mut self) {
        let n = self.set.len();
        if n == 0 {
            self.best_cost = 0;
            self.best_order = Some(Vec::new());
            return;
        }
        self.dfs(0, 0);
    }

    /// `used` is a bitmask over set positions; `acc` the travel cost so far
    /// (excluding the return leg).
    fn dfs(&mut self, used: u32, acc: i64) {
        let n = self.set.len();
        let depth = self.path.len();
        let depot = n;
        if depth == n {
            let last = *self.path.last().expect("nonempty route");
            let l = leg(self.inst, Some(self.set[last]), DEPOT);
            let ret = return_time(self.dims, &self.rows[depth - 1], l, self.shift_lo);
            if ret > self.shift_hi {
                return;
            }
            let total = acc + self.cost(last, depot) + self.wage * (ret - self.shift_lo);
            if total < self.best_cost {
                self.best_cost = total;
                self.best_order = Some(self.path.iter().map(|&i| self.set[i]).collect());
            }
            return;
        }
        for next in 0..n {
            if used & (1 << next) != 0 {
                continue;
            }
            let prev = self.path.last().copied();
            let l = leg(self.inst, prev.map(|i| self.set[i]), self.locs[next]);
            let mut row = std::mem::take(&mut self.rows[depth]);
            if depth == 0 {
                first_row(self.dims, self.shift_lo, l, self.release[next], &mut row);
            } else {
                next_row(
                    self.dims,
                    &self.rows[depth - 1],
                    l,
                    self.release[next],
                    &mut row,
                );
            }
            let worst = row[self.dims.worst()];
            self.rows[depth] = row;
            if worst > self.deadline[next] {
                continue;
            }
            let step = self.cost(prev.unwrap_or(depot), next);
            let used_next = used | (1 << next);
            if self
                .lower_bound(used_next, next, acc + step)
                .is_none_or(|lb| lb >= self.best_cost)
            {
                continue;
            }
            self.path.push(next);
            self.dfs(used_next, acc + step);
            self.path.pop();
        }
    }

    /// Lower bound on the total cost of any completion after visiting `last`,
    /// or `None` if no completion can be feasible.
    fn lower_bound(&self, used: u32, last: usize, acc: i64) -> Option<i64> {
        let n = self.set.len();
        let depot = n;
        let row = &self.rows[self.path.len()];
        let worst = row[self.dims.worst()];
        let remaining: Vec<usize> = (0..n).filter(|&r| used & (1 << r) == 0).collect();

        // every remaining node and the last one still need an outgoing arc
        let mut travel = acc;
        let mut minutes = worst + self.service[last];
        let out_last = remaining.iter().copied().chain(std::iter::once(depot));
        travel += out_last
            .clone()
            .map(|j| self.cost(last, j))
            .min()
            .expect("depot is always a target");
        minutes += out_last
            .map(|j| self.time(last, j))
            .min()
            .expect("depot is always a target");
        for &r in &remaining {
            let targets = remaining
                .iter()
                .copied()
                .filter(|&j| j != r)
                .chain(std::iter::once(depot));
            travel += targets
                .clone()
                .map(|j| self.cost(r, j))
                .min()
                .expect("depot is always a target");
            minutes += self.service[r]
                + targets
                    .map(|j| self.time(r, j))
                    .min()
                    .expect("depot is always a target");
            // earliest start of r comes after `last` and some predecessor
            let reach = std::iter::once(last)
                .chain(remaining.iter().copied().filter(|&j| j != r))
                .map(|j| self.time(j, r) + if j == last { 0 } else { self.service[j] })
                .min()
                .expect("last is always a predecessor");
            if worst + self.service[last] + reach > self.deadline[r] {
                return None;
            }
        }
        if minutes > self.shift_hi {
            return None;
        }
        Some(travel + self.wage * (minutes.max(self.shift_lo) - self.shift_lo))
    }
}

/// Memoized R-TSPTW results of one instance, keyed by caregiver, day and
/// sorted patient set.
#[derive(Debug, Default)]
pub struct RouteCache {
    map: RwLock<HashMap<CacheKey, CacheEntry>>,
}

pub type CacheKey = (CaregiverId, DayId, Vec<PatientId>);

#[derive(Clone, Debug)]
pub enum CacheEntry {
    Feasible(Arc<RoutedDay>),
    Infeasible,
}

impl CacheEntry {
    pub fn route(&self) -> Option<Arc<RoutedDay>> {
        match self {
            CacheEntry::Feasible(r) => Some(Arc::clone(r)),
            CacheEntry::Infeasible => None,
        }
    }
}

fn canonical(k: CaregiverId, d: DayId, patients: &[PatientId]) -> CacheKey {
    let mut set = patients.to_vec();
    set.sort();
    set.dedup();
    (k, d, set)
}

impl RouteCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, k: CaregiverId, d: DayId, patients: &[PatientId]) -> Option<CacheEntry> {
        self.map
            .read()
            .expect("cache lock")
            .get(&canonical(k, d, patients))
            .cloned()
    }

    /// Stores `entry` unless the key is already present; returns the stored entry.
    pub fn insert(
        &self,
        k: CaregiverId,
        d: DayId,
        patients: &[PatientId],
        entry: CacheEntry,
    ) -> CacheEntry {
        let mut map = self.map.write().expect("cache lock");
        map.entry(canonical(k, d, patients))
            .or_insert(entry)
            .clone()
    }

    pub fn get_or_solve(
        &self,
        k: CaregiverId,
        d: DayId,
        patients: &[PatientId],
        inst: &Instance,
    ) -> Result<Option<Arc<RoutedDay>>> {
        let key = canonical(k, d, patients);
        if let Some(hit) = self.map.read().expect("cache lock").get(&key) {
            return Ok(hit.route());
        }
        let entry = match solve_rtsptw(&key.2, d, k, inst)? {
            Some(r) => CacheEntry::Feasible(Arc::new(r)),
            None => CacheEntry::Infeasible,
        };
        let mut map = self.map.write().expect("cache lock");
        Ok(map.entry(key).or_insert(entry).route())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    /// Patients on a line: depot at 0, patients at the given positions (minutes).
    pub(crate) fn line_instance(pos: &[i64], windows: &[(i64, i64)], budgets: Budgets) -> Instance {
        let n = pos.len();
        let mut all = vec![0];
        all.extend_from_slice(pos);
        let mut mean = Matrix::new(n + 1);
        let mut dev = Matrix::new(n + 1);
        let mut cost = Matrix::new(n + 1);
        for a in 0..=n {
            for b in 0..=n {
                let t = (all[a] - all[b]).abs();
                mean.set(a, b, t);
                dev.set(a, b, twenty_percent(t));
                cost.set(a, b, Cents(10 * t));
            }
        }
        let patients = (0..n)
            .map(|i| Patient {
                id: format!("p{i}"),
                kind: PatientKind::New,
                visits_required: 1,
                min_gap_days: 0,
                windows: vec![TimeWindow::new(windows[i].0, windows[i].1)],
                service_mean: 30,
                service_dev: 6,
                revenue: vec![Cents(10_000)],
                compatibility: vec![vec![true]],
                preassignment: None,
            })
            .collect();
        Instance::new(InstanceData {
            days: vec!["mon".into()],
            caregivers: vec![Caregiver {
                id: "c".into(),
                work_windows: vec![Some(TimeWindow::new(480, 1020))],
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
        })
        .unwrap()
    }

    fn brute_force(set: &[PatientId], inst: &Instance) -> Option<(Cents, Vec<PatientId>)> {
        fn permute(
            rest: &mut Vec<PatientId>,
            cur: &mut Vec<PatientId>,
            inst: &Instance,
            best: &mut Option<(Cents, Vec<PatientId>)>,
        ) {
            if rest.is_empty() {
                if let Some(r) = RoutedDay::from_order(cur, DayId(0), CaregiverId(0), inst).unwrap()
                {
                    let better = match best {
                        None => true,
                        Some((c, o)) => (r.cost(), &r.route) < (*c, o),
                    };
                    if better {
                        *best = Some((r.cost(), r.route.clone()));
                    }
                }
                return;
            }
            for i in 0..rest.len() {
                let p = rest.remove(i);
                cur.push(p);
                permute(rest, cur, inst, best);
                cur.pop();
                rest.insert(i, p);
            }
        }
        let mut best = None;
        permute(&mut set.to_vec(), &mut Vec::new(), inst, &mut best);
        best
    }

    #[test]
    fn single_patient_cost() {
        // depot <-> patient 10 minutes each way at $1 per leg
        let mut data = line_instance(&[10], &[(0, 1440)], Budgets::new(0, 0)).into_data();
        data.travel.cost[0].set(0, 1, Cents(100));
        data.travel.cost[0].set(1, 0, Cents(100));
        data.caregivers[0].work_windows[0] = Some(TimeWindow::new(0, 1440));
        let inst = Instance::new(data).unwrap();
        let r = solve_rtsptw(&[PatientId(0)], DayId(0), CaregiverId(0), &inst)
            .unwrap()
            .unwrap();
        assert_eq!(r.route, vec![PatientId(0)]);
        assert_eq!(r.travel_cost, Cents(200));
        assert_eq!(r.wage_cost, Cents(2500));
    }

    #[test]
    fn urgent_far_patient_goes_first() {
        // C is farthest but must start by 560; nearest-neighbour would visit A and B first
        let inst = line_instance(
            &[10, 20, 60],
            &[(480, 1020), (480, 1020), (480, 560)],
            Budgets::new(0, 0),
        );
        let set = [PatientId(0), PatientId(1), PatientId(2)];
        let r = solve_rtsptw(&set, DayId(0), CaregiverId(0), &inst)
            .unwrap()
            .unwrap();
        assert_eq!(r.route[0], PatientId(2));
        let (cost, order) = brute_force(&set, &inst).unwrap();
        assert_eq!((r.cost(), r.route.clone()), (cost, order));
        let nn = RoutedDay::from_order(&set, DayId(0), CaregiverId(0), &inst).unwrap();
        assert!(nn.is_none());
    }

    #[test]
    fn budget_makes_set_infeasible() {
        let windows = [(480, 520), (480, 560)];
        let nominal = line_instance(&[30, 40], &windows, Budgets::new(0, 0));
        let set = [PatientId(0), PatientId(1)];
        assert!(solve_rtsptw(&set, DayId(0), CaregiverId(0), &nominal)
            .unwrap()
            .is_some());
        let robust = nominal.with_budgets(Budgets::new(1, 1));
        assert!(solve_rtsptw(&set, DayId(0), CaregiverId(0), &robust)
            .unwrap()
            .is_none());
        assert!(brute_force(&set, &robust).is_none());
    }

    #[test]
    fn too_many_patients() {
        let pos: Vec<i64> = (1..=9).collect();
        let inst = line_instance(&pos, &[(0, 1440); 9], Budgets::new(0, 0));
        let set: Vec<PatientId> = (0..9).map(PatientId).collect();
        assert!(matches!(
            solve_rtsptw(&set, DayId(0), CaregiverId(0), &inst),
            Err(Error::TooManyPatients { count: 9, limit: 8 })
        ));
    }

    #[test]
    fn cache_canonicalizes_keys() {
        let inst = line_instance(&[10, 20], &[(480, 1020); 2], Budgets::new(1, 1));
        let cache = RouteCache::new();
        assert!(cache
            .lookup(CaregiverId(0), DayId(0), &[PatientId(0)])
            .is_none());
        let a = cache
            .get_or_solve(
                CaregiverId(0),
                DayId(0),
                &[PatientId(1), PatientId(0)],
                &inst,
            )
            .unwrap()
            .unwrap();
        let b = cache
            .get_or_solve(
                CaregiverId(0),
                DayId(0),
                &[PatientId(0), PatientId(1)],
                &inst,
            )
            .unwrap()
            .unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        let direct = solve_rtsptw(
            &[PatientId(0), PatientId(1)],
            DayId(0),
            CaregiverId(0),
            &inst,
        )
        .unwrap()
        .unwrap();
        assert_eq!(*a, direct);
    }
}
