//! Robust home-healthcare routing and scheduling with nested branch-and-price.
//!
//! An agency decides which new patients to accept, which caregiver serves
//! each of them, on which days, and in what order every daily route runs,
//! while existing visits stay fixed. Service and travel times are uncertain
//! under budgeted uncertainty; every accepted plan must keep all time windows
//! and shifts for any scenario within the budgets.

pub mod bnp;
pub mod error;
pub mod evaluator;
pub mod heuristics;
pub mod instance_gen;
pub mod lp;
pub mod master;
pub mod model;
pub mod money;
pub mod plan;
pub mod pricing;
pub mod robust_time;
pub mod rtsptw;

pub use bnp::{solve, SolveConfig, SolveStats};
pub use error::{Error, Result};
pub use evaluator::{
    exhaustive_solve, profit, simulate, validate_plan, ProfitBreakdown, SimulationReport, Violation,
};
pub use heuristics::{greedy_plan, reject_all};
pub use instance_gen::{generate, Discipline, GeneratorConfig, Region, TwLevel};
pub use model::{
    day_patterns, load_instance, save_instance, Budgets, Caregiver, CaregiverId, DayId, Instance,
    InstanceData, Patient, PatientId, PatientKind, TimeWindow, UncertaintyLevel,
};
pub use money::Cents;
pub use plan::{Plan, PlanRoute, PlanStatus};
pub use robust_time::{adversarial_oracle, label_route, RobustLabelTable};
pub use rtsptw::{solve_rtsptw, RouteCache, RoutedDay};
