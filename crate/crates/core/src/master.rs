//! Restricted master problems of both decomposition levels.
//!
//! Level one picks one weekly plan per caregiver so that every new patient is
//! accepted at most once. Level two, for one caregiver, picks one route per
//! day so that accepted patients get exactly their required visits on a
//! valid day pattern. Master variables are left unbounded above: the
//! convexity rows already cap them at one, and explicit upper bounds would
//! only add dual noise.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, LpSolution, Relation};
use crate::model::{CaregiverId, DayId, Instance, PatientId};
use crate::money::Cents;
use crate::rtsptw::RoutedDay;

/// A caregiver's complete week: one route per working day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeeklyColumn {
    pub caregiver: CaregiverId,
    /// `None` on days the caregiver does not work.
    pub days: Vec<Option<Arc<RoutedDay>>>,
    pub value: Cents,
    /// New patients served, sorted.
    pub coverage: Vec<PatientId>,
}

impl WeeklyColumn {
    pub fn new(
        caregiver: CaregiverId,
        days: Vec<Option<Arc<RoutedDay>>>,
        inst: &Instance,
    ) -> WeeklyColumn {
        let value = days.iter().flatten().map(|r| r.value()).sum();
        let mut coverage: Vec<PatientId> = days
            .iter()
            .flatten()
            .flat_map(|r| r.route.iter().copied())
            .filter(|&p| inst.patient(p).is_new())
            .collect();
        coverage.sort();
        coverage.dedup();
        WeeklyColumn {
            caregiver,
            days,
            value,
            coverage,
        }
    }

    pub fn covers(&self, p: PatientId) -> bool {
        self.coverage.binary_search(&p).is_ok()
    }

    pub fn visit_days(&self, p: PatientId) -> Vec<DayId> {
        self.days
            .iter()
            .flatten()
            .filter(|r| r.visits(p))
            .map(|r| r.day)
            .collect()
    }

    pub fn route(&self, d: DayId) -> Option<&Arc<RoutedDay>> {
        self.days[d.0].as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualPrices1 {
    /// Per caregiver.
    pub v: Vec<f64>,
    /// Per patient; zero for existing patients.
    pub w: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Rmp1Solution {
    /// `lambda[k][c]` for the `c`-th column of caregiver `k`.
    pub lambda: Vec<Vec<f64>>,
    pub duals: DualPrices1,
    pub objective: f64,
    pub lp: LinearProgram,
    pub solution: LpSolution,
}

/// `value - v_k - sum of w over covered patients`.
pub fn reduced_cost1(col: &WeeklyColumn, duals: &DualPrices1) -> f64 {
    col.value.as_f64()
        - duals.v[col.caregiver.0]
        - col.coverage.iter().map(|p| duals.w[p.0]).sum::<f64>()
}

fn build_rmp1(
    inst: &Instance,
    columns: &[Vec<Arc<WeeklyColumn>>],
) -> Result<(LinearProgram, Vec<PatientId>)> {
    for (k, cols) in columns.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::MissingInitialColumn(CaregiverId(k)));
        }
    }
    let new = inst.new_patients().to_vec();
    let n_vars: usize = columns.iter().map(Vec::len).sum();
    let objective = columns.iter().flatten().map(|c| c.value.as_f64()).collect();
    let mut lp = LinearProgram::new(objective);
    let mut offset = 0;
    for cols in columns {
        let mut row = vec![0.0; n_vars];
        row[offset..offset + cols.len()].fill(1.0);
        lp.add_row(row, Relation::Eq, 1.0);
        offset += cols.len();
    }
    for &i in &new {
        let row = columns
            .iter()
            .flatten()
            .map(|c| if c.covers(i) { 1.0 } else { 0.0 })
            .collect();
        lp.add_row(row, Relation::Le, 1.0);
    }
    Ok((lp, new))
}

pub fn solve_rmp1(inst: &Instance, columns: &[Vec<Arc<WeeklyColumn>>]) -> Result<Rmp1Solution> {
    if columns.len() != inst.n_caregivers() {
        return Err(Error::MissingInitialColumn(CaregiverId(
            columns.len().min(inst.n_caregivers()),
        )));
    }
    let (lp, new) = build_rmp1(inst, columns)?;
    let solution = match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => s,
        other => {
            return Err(Error::NumericalFailure(format!(
                "first-level master not optimal: {other:?}"
            )))
        }
    };
    let n_k = columns.len();
    let v = solution.duals[..n_k].to_vec();
    let mut w = vec![0.0; inst.n_patients()];
    for (r, &i) in new.iter().enumerate() {
        w[i.0] = solution.duals[n_k + r].max(0.0);
    }
    let mut lambda = Vec::with_capacity(n_k);
    let mut offset = 0;
    for cols in columns {
        lambda.push(solution.x[offset..offset + cols.len()].to_vec());
        offset += cols.len();
    }
    Ok(Rmp1Solution {
        lambda,
        duals: DualPrices1 { v, w },
        objective: solution.objective,
        lp,
        solution,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualPrices2 {
    /// Per day; zero on days off.
    pub u: Vec<f64>,
    /// Per patient.
    pub z: Vec<f64>,
    /// `y[patient][day]`
    pub y: Vec<Vec<f64>>,
    /// `q[patient][s]` for the gap window of days `s ..= s + min_gap_days`.
    pub q: Vec<Vec<f64>>,
}

impl DualPrices2 {
    pub fn zero(inst: &Instance) -> Self {
        let nd = inst.n_days();
        DualPrices2 {
            u: vec![0.0; nd],
            z: vec![0.0; inst.n_patients()],
            y: vec![vec![0.0; nd]; inst.n_patients()],
            q: vec![Vec::new(); inst.n_patients()],
        }
    }

    /// Dual price charged for one visit of new patient `i` on day `d`,
    /// including the first-level share `w_i / v_i`.
    pub fn penalty(&self, i: PatientId, d: DayId, w: &[f64], inst: &Instance) -> f64 {
        let p = inst.patient(i);
        if !p.is_new() {
            return 0.0;
        }
        let v = p.visits_required as f64;
        let y = &self.y[i.0];
        let linking = v * y[d.0] - y.iter().sum::<f64>();
        let gap: f64 = self.q[i.0]
            .iter()
            .enumerate()
            .filter(|&(s, _)| s <= d.0 && d.0 <= s + p.min_gap_days)
            .map(|(_, &q)| q)
            .sum();
        w[i.0] / v + self.z[i.0] + linking + gap
    }

    /// Route value net of the dual prices of the new patients it visits.
    pub fn pricing_value(&self, route: &RoutedDay, w: &[f64], inst: &Instance) -> f64 {
        route.value().as_f64()
            - route
                .route
                .iter()
                .map(|&i| self.penalty(i, route.day, w, inst))
                .sum::<f64>()
    }

    /// Reduced cost of a route column: pricing value minus the day's dual.
    pub fn reduced_cost(&self, route: &RoutedDay, w: &[f64], inst: &Instance) -> f64 {
        self.pricing_value(route, w, inst) - self.u[route.day.0]
    }
}

/// Objective coefficient of a route in the second-level master.
pub fn adjusted_value(route: &RoutedDay, w: &[f64], inst: &Instance) -> f64 {
    route.value().as_f64()
        - route
            .route
            .iter()
            .filter(|&&i| inst.patient(i).is_new())
            .map(|&i| w[i.0] / inst.patient(i).visits_required as f64)
            .sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct Rmp2Solution {
    /// `lambda[d][c]` for the `c`-th route of day `d`.
    pub lambda: Vec<Vec<f64>>,
    pub duals: DualPrices2,
    pub objective: f64,
    pub lp: LinearProgram,
    pub row_names: Vec<String>,
}

impl Rmp2Solution {
    /// Fractional visit of `i` on day `d`.
    pub fn coverage(&self, columns: &[Vec<Arc<RoutedDay>>], i: PatientId, d: DayId) -> f64 {
        columns[d.0]
            .iter()
            .zip(&self.lambda[d.0])
            .filter(|(r, _)| r.visits(i))
            .map(|(_, &l)| l)
            .sum()
    }
}

enum Row2 {
    Day(DayId),
    Coverage(PatientId),
    Link(PatientId, DayId),
    Gap(PatientId, usize),
}

/// Second-level master of caregiver `k`. `relevant` lists the new patients
/// that may appear in its routes.
pub fn solve_rmp2(
    inst: &Instance,
    k: CaregiverId,
    columns: &[Vec<Arc<RoutedDay>>],
    w: &[f64],
    relevant: &[PatientId],
) -> Result<Rmp2Solution> {
    let nd = inst.n_days();
    if columns.len() != nd {
        return Err(Error::MissingDayColumn {
            caregiver: k,
            day: DayId(columns.len().min(nd)),
        });
    }
    let mut rows = Vec::new();
    for d in inst.day_ids() {
        if inst.work_window(k, d).is_some() {
            if columns[d.0].is_empty() {
                return Err(Error::MissingDayColumn {
                    caregiver: k,
                    day: d,
                });
            }
            rows.push(Row2::Day(d));
        }
    }
    for &i in relevant {
        rows.push(Row2::Coverage(i));
        for d in inst.day_ids() {
            if inst.compatible(i, k, d) {
                rows.push(Row2::Link(i, d));
            }
        }
        let gap = inst.patient(i).min_gap_days;
        if gap >= 1 && gap < nd {
            for s in 0..nd - gap {
                rows.push(Row2::Gap(i, s));
            }
        }
    }

    let vars: Vec<(DayId, &Arc<RoutedDay>)> = inst
        .day_ids()
        .flat_map(|d| columns[d.0].iter().map(move |r| (d, r)))
        .collect();
    let objective = vars
        .iter()
        .map(|(_, r)| adjusted_value(r, w, inst))
        .collect();
    let mut lp = LinearProgram::new(objective);
    let mut row_names = Vec::with_capacity(rows.len());
    for row in &rows {
        let (coefs, rel, rhs, name): (Vec<f64>, Relation, f64, String) = match *row {
            Row2::Day(d) => (
                vars.iter()
                    .map(|(dd, _)| if *dd == d { 1.0 } else { 0.0 })
                    .collect(),
                Relation::Eq,
                1.0,
                format!("day_{}", d.0),
            ),
            Row2::Coverage(i) => (
                vars.iter()
                    .map(|(_, r)| if r.visits(i) { 1.0 } else { 0.0 })
                    .collect(),
                Relation::Le,
                inst.patient(i).visits_required as f64,
                format!("visits_{}", i.0),
            ),
            Row2::Link(i, d) => {
                let v = inst.patient(i).visits_required as f64;
                (
                    vars.iter()
                        .map(|(dd, r)| match (r.visits(i), *dd == d) {
                            (false, _) => 0.0,
                            (true, true) => v - 1.0,
                            (true, false) => -1.0,
                        })
                        .collect(),
                    Relation::Le,
                    0.0,
                    format!("link_{}_{}", i.0, d.0),
                )
            }
            Row2::Gap(i, s) => {
                let gap = inst.patient(i).min_gap_days;
                (
                    vars.iter()
                        .map(|(dd, r)| {
                            if r.visits(i) && dd.0 >= s && dd.0 <= s + gap {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                    Relation::Le,
                    1.0,
                    format!("gap_{}_{}", i.0, s),
                )
            }
        };
        lp.add_row(coefs, rel, rhs);
        row_names.push(name);
    }

    let solution = match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => s,
        other => {
            return Err(Error::NumericalFailure(format!(
                "second-level master not optimal: {other:?}"
            )))
        }
    };
    let mut duals = DualPrices2::zero(inst);
    for (row, &y) in rows.iter().zip(&solution.duals) {
        match *row {
            Row2::Day(d) => duals.u[d.0] = y,
            Row2::Coverage(i) => duals.z[i.0] = y.max(0.0),
            Row2::Link(i, d) => duals.y[i.0][d.0] = y.max(0.0),
            Row2::Gap(i, s) => {
                let q = &mut duals.q[i.0];
                if q.len() <= s {
                    q.resize(s + 1, 0.0);
                }
                q[s] = y.max(0.0);
            }
        }
    }
    let mut lambda = vec![Vec::new(); nd];
    let mut offset = 0;
    for d in 0..nd {
        let n = columns[d].len();
        lambda[d] = solution.x[offset..offset + n].to_vec();
        offset += n;
    }
    Ok(Rmp2Solution {
        lambda,
        duals,
        objective: solution.objective,
        lp,
        row_names,
    })
}
