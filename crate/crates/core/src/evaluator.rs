//! Independent plan certification.
//!
//! Everything here recomputes schedules with the scenario-enumerating oracle
//! and never touches the label recursion the solver relies on.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{respects_gap, Budgets, CaregiverId, DayId, Instance, PatientId, DEPOT};
use crate::money::Cents;
use crate::plan::{Plan, PlanRoute, PlanStatus};
use crate::robust_time::{adversarial_oracle, simulate_scenario};

/// Constraint families a plan can break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// Worst-case start inside the patient's window.
    TimeWindow,
    /// Worst-case return inside the caregiver's shift.
    WorkHours,
    /// Exact number of visits.
    VisitCount,
    /// One caregiver per patient.
    SingleCaregiver,
    /// Existing patients keep their caregiver and days.
    Preassignment,
    /// Caregiver qualified and available.
    Compatibility,
    /// Minimum gap between visit days.
    MinGap,
    /// Each route is a simple tour.
    Flow,
    /// One depot tour per caregiver and day.
    Depot,
    /// Daily visit limit.
    RouteLength,
    /// Reported schedule or money figures disagree with a recomputation.
    Reporting,
}

impl Constraint {
    /// Numeric id in the model's constraint list, if any.
    pub fn id(self) -> Option<u8> {
        match self {
            Constraint::TimeWindow => Some(2),
            Constraint::WorkHours => Some(3),
            Constraint::VisitCount => Some(4),
            Constraint::SingleCaregiver => Some(5),
            Constraint::Preassignment => Some(6),
            Constraint::Compatibility => Some(7),
            Constraint::MinGap => Some(8),
            Constraint::Flow => Some(9),
            Constraint::Depot => Some(10),
            Constraint::RouteLength | Constraint::Reporting => None,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id() {
            Some(id) => write!(f, "({id})"),
            None => match self {
                Constraint::RouteLength => write!(f, "(route-length)"),
                _ => write!(f, "(report)"),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub constraint: Constraint,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "violation{} {}", self.constraint, self.message)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProfitBreakdown {
    pub revenue: Cents,
    pub travel: Cents,
    pub wage: Cents,
    pub profit: Cents,
}

fn route_travel(route: &[PatientId], day: DayId, inst: &Instance) -> Cents {
    let mut stops = vec![DEPOT];
    stops.extend(route.iter().map(|p| p.loc()));
    stops.push(DEPOT);
    if route.is_empty() {
        return Cents::ZERO;
    }
    stops
        .windows(2)
        .map(|w| inst.travel.cost(day, w[0], w[1]))
        .sum()
}

fn check_refs(r: &PlanRoute, inst: &Instance) -> Result<()> {
    if r.caregiver.0 >= inst.n_caregivers() || r.day.0 >= inst.n_days() {
        return Err(Error::InvalidPlan(
            "route references an unknown caregiver or day".into(),
        ));
    }
    if let Some(p) = r.patients.iter().find(|p| p.0 >= inst.n_patients()) {
        return Err(Error::InvalidPlan(format!("unknown patient {p:?}")));
    }
    if inst.work_window(r.caregiver, r.day).is_none() {
        return Err(Error::InvalidPlan(format!(
            "caregiver '{}' does not work on day '{}'",
            inst.caregiver(r.caregiver).id,
            inst.days[r.day.0]
        )));
    }
    Ok(())
}

/// Money figures of a plan, recomputed from its routes.
pub fn profit(plan: &Plan, inst: &Instance) -> Result<ProfitBreakdown> {
    let mut out = ProfitBreakdown::default();
    for r in &plan.routes {
        check_refs(r, inst)?;
        let shift = inst.work_window(r.caregiver, r.day).expect("checked");
        out.revenue += r
            .patients
            .iter()
            .map(|&p| inst.revenue(r.caregiver, p))
            .sum();
        out.travel += route_travel(&r.patients, r.day, inst);
        if !r.patients.is_empty() {
            let worst = adversarial_oracle(&r.patients, r.day, r.caregiver, inst)?;
            out.wage += inst.caregiver(r.caregiver).wage_rate * (worst.worst_return - shift.lo);
        }
    }
    out.profit = out.revenue - out.travel - out.wage;
    Ok(out)
}

/// Checks every model constraint; an empty list means the plan is valid.
pub fn validate_plan(plan: &Plan, inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |c: Constraint, message: String| {
        out.push(Violation {
            constraint: c,
            message,
        })
    };
    let pname = |p: PatientId| inst.patient(p).id.clone();
    let kname = |k: CaregiverId| inst.caregiver(k).id.clone();
    let dname = |d: DayId| inst.days[d.0].clone();

    let mut tours: HashMap<(CaregiverId, DayId), usize> = HashMap::new();
    // patient -> caregiver -> visit days
    let mut visits: BTreeMap<PatientId, BTreeMap<CaregiverId, Vec<DayId>>> = BTreeMap::new();
    for r in &plan.routes {
        if let Err(e) = check_refs(r, inst) {
            let c = if r.caregiver.0 < inst.n_caregivers() && r.day.0 < inst.n_days() {
                Constraint::WorkHours
            } else {
                Constraint::Flow
            };
            push(c, e.to_string());
            continue;
        }
        *tours.entry((r.caregiver, r.day)).or_default() += 1;
        let mut seen = Vec::new();
        for &p in &r.patients {
            if seen.contains(&p) {
                push(
                    Constraint::Flow,
                    format!(
                        "patient '{}' appears twice on the route of '{}' on '{}'",
                        pname(p),
                        kname(r.caregiver),
                        dname(r.day)
                    ),
                );
            }
            seen.push(p);
            if !inst.compatible(p, r.caregiver, r.day) {
                push(
                    Constraint::Compatibility,
                    format!(
                        "caregiver '{}' may not treat '{}' on '{}'",
                        kname(r.caregiver),
                        pname(p),
                        dname(r.day)
                    ),
                );
            }
            visits
                .entry(p)
                .or_default()
                .entry(r.caregiver)
                .or_default()
                .push(r.day);
        }
        if r.patients.len() > inst.max_per_day() {
            push(
                Constraint::RouteLength,
                format!(
                    "route of '{}' on '{}' has {} visits, limit {}",
                    kname(r.caregiver),
                    dname(r.day),
                    r.patients.len(),
                    inst.max_per_day()
                ),
            );
        }
        if r.patients.is_empty() {
            continue;
        }
        let worst = match adversarial_oracle(&r.patients, r.day, r.caregiver, inst) {
            Ok(w) => w,
            Err(e) => {
                push(Constraint::RouteLength, e.to_string());
                continue;
            }
        };
        for (pos, (&p, &s)) in r.patients.iter().zip(&worst.worst_start).enumerate() {
            let win = inst.window(p, r.day);
            if s > win.hi {
                push(
                    Constraint::TimeWindow,
                    format!(
                        "'{}' may start at {s} on '{}', window ends {} (position {})",
                        pname(p),
                        dname(r.day),
                        win.hi,
                        pos + 1
                    ),
                );
            }
        }
        let shift = inst.work_window(r.caregiver, r.day).expect("checked");
        if worst.worst_return > shift.hi {
            push(
                Constraint::WorkHours,
                format!(
                    "'{}' may return at {} on '{}', shift ends {}",
                    kname(r.caregiver),
                    worst.worst_return,
                    dname(r.day),
                    shift.hi
                ),
            );
        }
        if r.worst_start != worst.worst_start || r.worst_return != worst.worst_return {
            push(
                Constraint::Reporting,
                format!(
                    "reported worst-case schedule of '{}' on '{}' differs from recomputation",
                    kname(r.caregiver),
                    dname(r.day)
                ),
            );
        }
        if r.travel_cost != route_travel(&r.patients, r.day, inst)
            || r.wage_cost
                != inst.caregiver(r.caregiver).wage_rate * (worst.worst_return - shift.lo)
        {
            push(
                Constraint::Reporting,
                format!(
                    "reported costs of '{}' on '{}' differ from recomputation",
                    kname(r.caregiver),
                    dname(r.day)
                ),
            );
        }
    }
    for (&(k, d), &n) in &tours {
        if n > 1 {
            push(
                Constraint::Depot,
                format!("'{}' has {n} tours on '{}'", kname(k), dname(d)),
            );
        }
    }

    for (idx, patient) in inst.patients.iter().enumerate() {
        let p = PatientId(idx);
        let by_caregiver = visits.get(&p);
        let caregivers: Vec<CaregiverId> = by_caregiver
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default();
        let mut days: Vec<DayId> = by_caregiver
            .map(|m| m.values().flatten().copied().collect())
            .unwrap_or_default();
        days.sort();
        if caregivers.len() > 1 {
            push(
                Constraint::SingleCaregiver,
                format!(
                    "'{}' is visited by {} caregivers",
                    patient.id,
                    caregivers.len()
                ),
            );
        }
        if let Some(pre) = &patient.preassignment {
            if caregivers.iter().any(|&k| k != pre.caregiver) || days != pre.days {
                push(
                    Constraint::Preassignment,
                    format!(
                        "existing patient '{}' must be visited by '{}' on its fixed days",
                        patient.id,
                        kname(pre.caregiver)
                    ),
                );
            }
        }
        if !days.is_empty() || patient.is_existing() {
            if days.len() != patient.visits_required {
                push(
                    Constraint::VisitCount,
                    format!(
                        "'{}' has {} visits, requires {}",
                        patient.id,
                        days.len(),
                        patient.visits_required
                    ),
                );
            }
            let mut distinct = days.clone();
            distinct.dedup();
            if distinct.len() != days.len() || !respects_gap(&distinct, patient.min_gap_days) {
                push(
                    Constraint::MinGap,
                    format!(
                        "visit days of '{}' are closer than {} days apart",
                        patient.id,
                        patient.min_gap_days + 1
                    ),
                );
            }
        }
        let accepted = plan.accepted.contains(&p);
        if patient.is_new() && accepted != !days.is_empty() {
            push(
                Constraint::Reporting,
                format!("acceptance of '{}' disagrees with its visits", patient.id),
            );
        }
        let assigned: Vec<CaregiverId> = plan
            .assignment
            .iter()
            .filter(|a| a.0 == p)
            .map(|a| a.1)
            .collect();
        if !days.is_empty() && assigned != caregivers {
            push(
                Constraint::Reporting,
                format!("assignment of '{}' disagrees with its visits", patient.id),
            );
        }
    }
    if let Ok(money) = profit(plan, inst) {
        if money.revenue != plan.revenue
            || money.travel != plan.travel
            || money.wage != plan.wage
            || money.profit != plan.profit
        {
            push(
                Constraint::Reporting,
                format!(
                    "reported profit {} differs from recomputed {}",
                    plan.profit, money.profit
                ),
            );
        }
    }
    out
}

/// Cheapest robust order of a patient set by trying every permutation.
fn best_order(
    set: &[PatientId],
    k: CaregiverId,
    d: DayId,
    inst: &Instance,
) -> Result<Option<(Cents, Vec<PatientId>)>> {
    let shift = inst.work_window(k, d).expect("working day");
    let wage = inst.caregiver(k).wage_rate;
    let mut order = set.to_vec();
    order.sort();
    let mut best: Option<(Cents, Vec<PatientId>)> = None;
    loop {
        let worst = adversarial_oracle(&order, d, k, inst)?;
        if worst.feasible(&order, d, k, inst) {
            let cost = route_travel(&order, d, inst) + wage * (worst.worst_return - shift.lo);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, order.clone()));
            }
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(best)
}

fn next_permutation(v: &mut [PatientId]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Global optimum by enumerating every acceptance, caregiver and day-pattern
/// choice and routing each day by full permutation search.
pub fn exhaustive_solve(inst: &Instance) -> Result<Plan> {
    let new = inst.new_patients().to_vec();
    // per new patient: None = reject, else (caregiver, pattern)
    let mut options: Vec<Vec<Option<(CaregiverId, Vec<DayId>)>>> = Vec::with_capacity(new.len());
    let mut combos: u128 = 1;
    for &i in &new {
        let mut opts = vec![None];
        for k in inst.caregiver_ids() {
            for pat in inst.patterns_for(i, k) {
                opts.push(Some((k, pat.to_vec())));
            }
        }
        combos = combos.saturating_mul(opts.len() as u128);
        options.push(opts);
    }
    if combos > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(combos));
    }

    let mut memo: HashMap<(CaregiverId, DayId, Vec<PatientId>), Option<(Cents, Vec<PatientId>)>> =
        HashMap::new();
    let mut route = |k: CaregiverId,
                     d: DayId,
                     mut set: Vec<PatientId>|
     -> Result<Option<(Cents, Vec<PatientId>)>> {
        set.sort();
        if let Some(hit) = memo.get(&(k, d, set.clone())) {
            return Ok(hit.clone());
        }
        let res = if set.len() > inst.max_per_day() {
            None
        } else {
            best_order(&set, k, d, inst)?
        };
        memo.insert((k, d, set), res.clone());
        Ok(res)
    };

    for k in inst.caregiver_ids() {
        for d in inst.day_ids() {
            if inst.work_window(k, d).is_some()
                && route(k, d, inst.existing_on(k, d).to_vec())?.is_none()
            {
                return Err(Error::Infeasible(format!(
                    "existing visits of '{}' on '{}' cannot be scheduled robustly",
                    inst.caregiver(k).id,
                    inst.days[d.0]
                )));
            }
        }
    }

    let mut choice = vec![0usize; new.len()];
    let mut best: Option<(Cents, Vec<(CaregiverId, DayId, Vec<PatientId>)>)> = None;
    loop {
        let mut sets: BTreeMap<(CaregiverId, DayId), Vec<PatientId>> = BTreeMap::new();
        for k in inst.caregiver_ids() {
            for d in inst.day_ids() {
                if inst.work_window(k, d).is_some() {
                    sets.insert((k, d), inst.existing_on(k, d).to_vec());
                }
            }
        }
        for (idx, &i) in new.iter().enumerate() {
            if let Some((k, pat)) = &options[idx][choice[idx]] {
                for d in pat {
                    sets.get_mut(&(*k, *d))
                        .expect("pattern days are working days")
                        .push(i);
                }
            }
        }
        let mut total = Cents::ZERO;
        let mut routes = Vec::new();
        let mut feasible = true;
        for ((k, d), set) in sets {
            let revenue: Cents = set.iter().map(|&p| inst.revenue(k, p)).sum();
            match route(k, d, set)? {
                Some((cost, order)) => {
                    total += revenue - cost;
                    routes.push((k, d, order));
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, routes));
        }
        // advance the mixed-radix counter
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                let (_, routes) = best.expect("the reject-all choice is feasible");
                return Ok(plan_from_orders(inst, &routes));
            }
            choice[pos] += 1;
            if choice[pos] < options[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

fn plan_from_orders(inst: &Instance, routes: &[(CaregiverId, DayId, Vec<PatientId>)]) -> Plan {
    let mut out = Vec::new();
    for (k, d, order) in routes {
        if order.is_empty() {
            continue;
        }
        let worst = adversarial_oracle(order, *d, *k, inst).expect("short route");
        let shift = inst.work_window(*k, *d).expect("working day");
        let zero = vec![false; order.len()];
        let (nominal, _) = simulate_scenario(
            order,
            *d,
            shift.lo,
            &zero,
            &vec![false; order.len() + 1],
            inst,
        );
        out.push(PlanRoute {
            caregiver: *k,
            day: *d,
            patients: order.clone(),
            worst_start: worst.worst_start,
            nominal_start: nominal,
            worst_return: worst.worst_return,
            travel_cost: route_travel(order, *d, inst),
            wage_cost: inst.caregiver(*k).wage_rate * (worst.worst_return - shift.lo),
            revenue: order.iter().map(|&p| inst.revenue(*k, p)).sum(),
        });
    }
    let mut assignment: Vec<(PatientId, CaregiverId)> = out
        .iter()
        .flat_map(|r| r.patients.iter().map(move |&p| (p, r.caregiver)))
        .collect();
    assignment.sort();
    assignment.dedup();
    let accepted = assignment
        .iter()
        .map(|a| a.0)
        .filter(|&p| inst.patient(p).is_new())
        .collect();
    let revenue: Cents = out.iter().map(|r| r.revenue).sum();
    let travel: Cents = out.iter().map(|r| r.travel_cost).sum();
    let wage: Cents = out.iter().map(|r| r.wage_cost).sum();
    Plan {
        status: PlanStatus::Optimal,
        budgets: inst.budgets,
        accepted,
        assignment,
        routes: out,
        revenue,
        travel,
        wage,
        profit: revenue - travel - wage,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    /// Probability that a single service or arc runs late.
    pub delay_probability: f64,
    /// Budgets to thin scenarios to; defaults to the instance budgets.
    pub budgets: Option<Budgets>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            delay_probability: 0.2,
            budgets: None,
        }
    }
}

/// Lateness and overtime of one sampled week.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScenarioRow {
    pub sample: usize,
    pub late_visits: usize,
    pub total_lateness: i64,
    pub max_lateness: i64,
    pub overtime_routes: usize,
    pub total_overtime: i64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationReport {
    pub rows: Vec<ScenarioRow>,
    pub late_visits: usize,
    pub total_lateness: i64,
    pub max_lateness: i64,
    pub overtime_routes: usize,
    pub total_overtime: i64,
    pub max_overtime: i64,
}

impl SimulationReport {
    pub fn is_clean(&self) -> bool {
        self.late_visits == 0 && self.overtime_routes == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "sample",
            "late_visits",
            "total_lateness",
            "max_lateness",
            "overtime_routes",
            "total_overtime",
        ])
        .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.sample.to_string(),
                r.late_visits.to_string(),
                r.total_lateness.to_string(),
                r.max_lateness.to_string(),
                r.overtime_routes.to_string(),
                r.total_overtime.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Keeps at most `cap` of the flagged entries, chosen uniformly.
fn thin(flags: &mut [bool], cap: usize, rng: &mut ChaCha8Rng) {
    let mut on: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
    if on.len() <= cap {
        return;
    }
    on.shuffle(rng);
    for &i in &on[cap..] {
        flags[i] = false;
    }
}

/// Monte Carlo lateness and overtime of `plan` under random delays that
/// stay within the budgets (per route).
pub fn simulate(
    plan: &Plan,
    inst: &Instance,
    samples: usize,
    seed: u64,
    config: SimulationConfig,
) -> Result<SimulationReport> {
    for r in &plan.routes {
        check_refs(r, inst)?;
    }
    let budgets = config.budgets.unwrap_or(inst.budgets);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimulationReport::default();
    for sample in 0..samples {
        let mut row = ScenarioRow {
            sample,
            ..ScenarioRow::default()
        };
        for r in &plan.routes {
            let len = r.patients.len();
            let (gp, gt) = budgets.clamped(len);
            let mut service: Vec<bool> = (0..len)
                .map(|_| rng.gen_bool(config.delay_probability))
                .collect();
            let mut arcs: Vec<bool> = (0..=len)
                .map(|_| rng.gen_bool(config.delay_probability))
                .collect();
            thin(&mut service, gp, &mut rng);
            thin(&mut arcs, gt, &mut rng);
            let shift = inst.work_window(r.caregiver, r.day).expect("checked");
            let (starts, ret) =
                simulate_scenario(&r.patients, r.day, shift.lo, &service, &arcs, inst);
            for (&p, &s) in r.patients.iter().zip(&starts) {
                let late = s - inst.window(p, r.day).hi;
                if late > 0 {
                    row.late_visits += 1;
                    row.total_lateness += late;
                    row.max_lateness = row.max_lateness.max(late);
                }
            }
            let over = ret - shift.hi;
            if over > 0 {
                row.overtime_routes += 1;
                row.total_overtime += over;
                report.max_overtime = report.max_overtime.max(over);
            }
        }
        report.late_visits += row.late_visits;
        report.total_lateness += row.total_lateness;
        report.max_lateness = report.max_lateness.max(row.max_lateness);
        report.overtime_routes += row.overtime_routes;
        report.total_overtime += row.total_overtime;
        report.rows.push(row);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_in_order() {
        let mut v = vec![PatientId(0), PatientId(1), PatientId(2)];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn thinning_caps_flags() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut flags = vec![true; 6];
        thin(&mut flags, 2, &mut rng);
        assert_eq!(flags.iter().filter(|&&f| f).count(), 2);
        let mut few = vec![true, false, true];
        thin(&mut few, 5, &mut rng);
        assert_eq!(few, vec![true, false, true]);
    }

    #[test]
    fn constraint_ids() {
        assert_eq!(Constraint::VisitCount.id(), Some(4));
        assert_eq!(Constraint::VisitCount.to_string(), "(4)");
        assert_eq!(Constraint::RouteLength.to_string(), "(route-length)");
    }
}
