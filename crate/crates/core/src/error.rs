use std::io;

use thiserror::Error;

use crate::model::{CaregiverId, DayId, PatientId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unknown patient {0:?}")]
    UnknownPatient(PatientId),
    #[error("caregiver {caregiver:?} does not work on day {day:?}")]
    CaregiverUnavailable { caregiver: CaregiverId, day: DayId },
    #[error("route of length {0} is too long for exhaustive evaluation")]
    RouteTooLong(usize),
    #[error("{count} patients exceed the daily limit of {limit}")]
    TooManyPatients { count: usize, limit: usize },
    #[error("patient {patient:?} cannot be treated by caregiver {caregiver:?} on day {day:?}")]
    IncompatiblePatient {
        patient: PatientId,
        caregiver: CaregiverId,
        day: DayId,
    },
    #[error("LP numerical failure: {0}")]
    NumericalFailure(String),
    #[error("caregiver {0:?} has no column in the master problem")]
    MissingInitialColumn(CaregiverId),
    #[error("day {day:?} of caregiver {caregiver:?} has no column in the master problem")]
    MissingDayColumn { caregiver: CaregiverId, day: DayId },
    #[error("invalid day pattern for patient {0:?}")]
    InvalidPattern(PatientId),
    #[error("no fractional patient to branch on")]
    NoFractionalPatient,
    #[error("time limit reached")]
    TimeLimitReached,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("exhaustive search too large: {0} combinations")]
    TooLarge(u128),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}
