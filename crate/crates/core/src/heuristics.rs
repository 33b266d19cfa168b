//! Starting columns: the plan that rejects every new patient, and a greedy
//! acceptance plan on top of it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::master::WeeklyColumn;
use crate::model::{CaregiverId, DayId, Instance, PatientId, DEPOT};
use crate::money::Cents;
use crate::rtsptw::{RouteCache, RoutedDay};

/// One column per caregiver visiting only the existing patients.
pub fn reject_all(inst: &Instance, cache: &RouteCache) -> Result<Vec<Arc<WeeklyColumn>>> {
    inst.caregiver_ids()
        .map(|k| existing_only(inst, k, cache).map(Arc::new))
        .collect()
}

fn existing_only(inst: &Instance, k: CaregiverId, cache: &RouteCache) -> Result<WeeklyColumn> {
    let mut days = Vec::with_capacity(inst.n_days());
    for d in inst.day_ids() {
        if inst.work_window(k, d).is_none() {
            days.push(None);
            continue;
        }
        let set = inst.existing_on(k, d);
        if set.len() > inst.max_per_day() {
            return Err(Error::Infeasible(format!(
                "caregiver '{}' has {} existing visits on day '{}'",
                inst.caregiver(k).id,
                set.len(),
                inst.days[d.0]
            )));
        }
        let route = cache.get_or_solve(k, d, set, inst)?.ok_or_else(|| {
            Error::Infeasible(format!(
                "existing visits of caregiver '{}' on day '{}' cannot be scheduled robustly",
                inst.caregiver(k).id,
                inst.days[d.0]
            ))
        })?;
        days.push(Some(route));
    }
    Ok(WeeklyColumn::new(k, days, inst))
}

/// Estimated daily value of adding `i` to caregiver `k`'s route on `d`:
/// revenue minus wage for service and the shortest trip onward, minus the
/// cheapest arc in. Other patients that `k` might visit that day count as
/// neighbors.
pub fn insertion_value(inst: &Instance, i: PatientId, k: CaregiverId, d: DayId) -> f64 {
    let neighbors = inst
        .existing_on(k, d)
        .iter()
        .chain(inst.new_patients())
        .filter(|&&j| j != i && (inst.patient(j).is_existing() || inst.compatible(j, k, d)))
        .map(|j| j.loc())
        .chain(std::iter::once(DEPOT));
    let mut out_time = i64::MAX;
    let mut in_cost = i64::MAX;
    for j in neighbors {
        out_time = out_time.min(inst.travel.time(i.loc(), j));
        in_cost = in_cost.min(inst.travel.cost(d, j, i.loc()).0);
    }
    let wage = inst.caregiver(k).wage_rate.0 * (out_time + inst.patient(i).service_mean);
    (inst.revenue(k, i).0 - wage - in_cost) as f64
}

struct Candidate {
    patient: PatientId,
    caregiver: CaregiverId,
    pattern: Vec<DayId>,
    value: f64,
}

/// Greedy acceptance: candidates (patient, caregiver, day pattern) in
/// descending estimated value; each is committed if its estimate is positive,
/// every affected day stays robustly routable, and the plan's profit grows.
pub fn greedy_plan(inst: &Instance, cache: &RouteCache) -> Result<Vec<Arc<WeeklyColumn>>> {
    let base = reject_all(inst, cache)?;
    let mut routes: Vec<Vec<Option<Arc<RoutedDay>>>> =
        base.iter().map(|c| c.days.clone()).collect();

    let mut candidates = Vec::new();
    for &i in inst.new_patients() {
        for k in inst.caregiver_ids() {
            for pattern in inst.patterns_for(i, k) {
                let value = pattern
                    .iter()
                    .map(|&d| insertion_value(inst, i, k, d))
                    .sum();
                candidates.push(Candidate {
                    patient: i,
                    caregiver: k,
                    pattern: pattern.to_vec(),
                    value,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.patient.cmp(&b.patient))
            .then(a.caregiver.cmp(&b.caregiver))
            .then(a.pattern.cmp(&b.pattern))
    });

    let mut accepted = vec![false; inst.n_patients()];
    for cand in candidates {
        if accepted[cand.patient.0] || cand.value <= 0.0 {
            continue;
        }
        let k = cand.caregiver;
        let mut replacement = Vec::with_capacity(cand.pattern.len());
        let mut gain = Cents::ZERO;
        for &d in &cand.pattern {
            let current = routes[k.0][d.0]
                .as_ref()
                .expect("pattern days are working days");
            if current.route.len() >= inst.max_per_day() {
                break;
            }
            let mut set = current.covered.clone();
            set.push(cand.patient);
            match cache.get_or_solve(k, d, &set, inst)? {
                Some(r) => {
                    gain += r.value() - current.value();
                    replacement.push((d, r));
                }
                None => break,
            }
        }
        if replacement.len() == cand.pattern.len() && gain > Cents::ZERO {
            for (d, r) in replacement {
                routes[k.0][d.0] = Some(r);
            }
            accepted[cand.patient.0] = true;
        }
    }
    Ok(routes
        .into_iter()
        .enumerate()
        .map(|(k, days)| Arc::new(WeeklyColumn::new(CaregiverId(k), days, inst)))
        .collect())
}

pub fn columns_profit(columns: &[Arc<WeeklyColumn>]) -> Cents {
    columns.iter().map(|c| c.value).sum()
}
