//! Weekly plans and their JSON form.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master::WeeklyColumn;
use crate::model::{Budgets, CaregiverId, DayId, Instance, PatientId};
use crate::money::Cents;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    /// Proven optimal.
    Optimal,
    /// Best plan found before the time limit.
    TimeLimit,
    /// Produced by a heuristic without a search.
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanRoute {
    pub caregiver: CaregiverId,
    pub day: DayId,
    pub patients: Vec<PatientId>,
    pub worst_start: Vec<i64>,
    pub nominal_start: Vec<i64>,
    pub worst_return: i64,
    pub travel_cost: Cents,
    pub wage_cost: Cents,
    pub revenue: Cents,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub status: PlanStatus,
    pub budgets: Budgets,
    /// New patients accepted, sorted.
    pub accepted: Vec<PatientId>,
    /// Caregiver of every visited patient, sorted by patient.
    pub assignment: Vec<(PatientId, CaregiverId)>,
    /// Nonempty routes ordered by caregiver, then day.
    pub routes: Vec<PlanRoute>,
    pub revenue: Cents,
    pub travel: Cents,
    pub wage: Cents,
    pub profit: Cents,
}

impl Plan {
    pub fn from_columns(
        inst: &Instance,
        columns: &[Arc<WeeklyColumn>],
        status: PlanStatus,
    ) -> Plan {
        let mut routes = Vec::new();
        for col in columns {
            for r in col.days.iter().flatten() {
                if r.route.is_empty() {
                    continue;
                }
                routes.push(PlanRoute {
                    caregiver: r.caregiver,
                    day: r.day,
                    patients: r.route.clone(),
                    worst_start: r.labels.worst_starts(),
                    nominal_start: r.labels.nominal_starts(),
                    worst_return: r.labels.ret,
                    travel_cost: r.travel_cost,
                    wage_cost: r.wage_cost,
                    revenue: r.revenue,
                });
            }
        }
        routes.sort_by_key(|r| (r.caregiver, r.day));
        let mut assignment: Vec<(PatientId, CaregiverId)> = routes
            .iter()
            .flat_map(|r| r.patients.iter().map(move |&p| (p, r.caregiver)))
            .collect();
        assignment.sort();
        assignment.dedup();
        let accepted: Vec<PatientId> = assignment
            .iter()
            .map(|&(p, _)| p)
            .filter(|&p| inst.patient(p).is_new())
            .collect();
        let revenue = routes.iter().map(|r| r.revenue).sum();
        let travel = routes.iter().map(|r| r.travel_cost).sum();
        let wage = routes.iter().map(|r| r.wage_cost).sum();
        Plan {
            status,
            budgets: inst.budgets,
            accepted,
            assignment,
            routes,
            revenue,
            travel,
            wage,
            profit: revenue - travel - wage,
        }
    }

    pub fn route(&self, k: CaregiverId, d: DayId) -> Option<&PlanRoute> {
        self.routes.iter().find(|r| r.caregiver == k && r.day == d)
    }

    pub fn caregiver_of(&self, p: PatientId) -> Option<CaregiverId> {
        self.assignment
            .iter()
            .find(|&&(q, _)| q == p)
            .map(|&(_, k)| k)
    }

    pub fn to_json(&self, inst: &Instance) -> String {
        let file = PlanFile {
            status: self.status,
            budgets: self.budgets,
            accepted: self
                .accepted
                .iter()
                .map(|&p| inst.patient(p).id.clone())
                .collect(),
            assignment: self
                .assignment
                .iter()
                .map(|&(p, k)| AssignmentFile {
                    patient: inst.patient(p).id.clone(),
                    caregiver: inst.caregiver(k).id.clone(),
                })
                .collect(),
            routes: self
                .routes
                .iter()
                .map(|r| RouteFile {
                    caregiver: inst.caregiver(r.caregiver).id.clone(),
                    day: inst.days[r.day.0].clone(),
                    patients: r
                        .patients
                        .iter()
                        .map(|&p| inst.patient(p).id.clone())
                        .collect(),
                    worst_start: r.worst_start.clone(),
                    nominal_start: r.nominal_start.clone(),
                    worst_return: r.worst_return,
                    travel_cost: r.travel_cost.0,
                    wage_cost: r.wage_cost.0,
                    revenue: r.revenue.0,
                })
                .collect(),
            revenue: self.revenue.0,
            travel: self.travel.0,
            wage: self.wage.0,
            profit: self.profit.0,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, inst: &Instance) -> Result<Plan> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let patient = |id: &str| {
            inst.patient_index(id)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown patient '{id}'")))
        };
        let caregiver = |id: &str| {
            inst.caregiver_index(id)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown caregiver '{id}'")))
        };
        let day = |id: &str| {
            inst.day_index(id)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown day '{id}'")))
        };
        let mut routes = Vec::with_capacity(file.routes.len());
        for r in &file.routes {
            routes.push(PlanRoute {
                caregiver: caregiver(&r.caregiver)?,
                day: day(&r.day)?,
                patients: r
                    .patients
                    .iter()
                    .map(|p| patient(p))
                    .collect::<Result<_>>()?,
                worst_start: r.worst_start.clone(),
                nominal_start: r.nominal_start.clone(),
                worst_return: r.worst_return,
                travel_cost: Cents(r.travel_cost),
                wage_cost: Cents(r.wage_cost),
                revenue: Cents(r.revenue),
            });
        }
        Ok(Plan {
            status: file.status,
            budgets: file.budgets,
            accepted: file
                .accepted
                .iter()
                .map(|p| patient(p))
                .collect::<Result<_>>()?,
            assignment: file
                .assignment
                .iter()
                .map(|a| Ok((patient(&a.patient)?, caregiver(&a.caregiver)?)))
                .collect::<Result<_>>()?,
            routes,
            revenue: Cents(file.revenue),
            travel: Cents(file.travel),
            wage: Cents(file.wage),
            profit: Cents(file.profit),
        })
    }

    pub fn save(&self, inst: &Instance, path: &Path) -> Result<()> {
        fs::write(path, self.to_json(inst))?;
        Ok(())
    }

    pub fn load(path: &Path, inst: &Instance) -> Result<Plan> {
        Plan::from_json(&fs::read_to_string(path)?, inst)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    status: PlanStatus,
    budgets: Budgets,
    accepted: Vec<String>,
    assignment: Vec<AssignmentFile>,
    routes: Vec<RouteFile>,
    revenue: i64,
    travel: i64,
    wage: i64,
    profit: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentFile {
    patient: String,
    caregiver: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    caregiver: String,
    day: String,
    patients: Vec<String>,
    worst_start: Vec<i64>,
    nominal_start: Vec<i64>,
    worst_return: i64,
    travel_cost: i64,
    wage_cost: i64,
    revenue: i64,
}
