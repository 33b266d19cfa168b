//! Problem data: patients, caregivers, days, travel matrices and uncertainty
//! budgets, plus the JSON instance format.
//!
//! Times are integer minutes from midnight and money is integer cents. The
//! depot is stored once as location `0`; patient `i` lives at location `i + 1`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::money::Cents;

pub const MINUTES_PER_DAY: i64 = 1440;
pub const DEFAULT_MAX_PATIENTS_PER_DAY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatientId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaregiverId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DayId(pub usize);

impl PatientId {
    /// Location index in the travel matrices.
    #[inline]
    pub fn loc(self) -> usize {
        self.0 + 1
    }
}

pub const DEPOT: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub lo: i64,
    pub hi: i64,
}

impl TimeWindow {
    pub const fn new(lo: i64, hi: i64) -> Self {
        TimeWindow { lo, hi }
    }

    pub fn is_valid(&self) -> bool {
        0 <= self.lo && self.lo <= self.hi && self.hi <= MINUTES_PER_DAY
    }

    pub fn contains(&self, t: i64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn width(&self) -> i64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatientKind {
    Existing,
    New,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preassignment {
    pub caregiver: CaregiverId,
    pub days: Vec<DayId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patient {
    pub id: String,
    pub kind: PatientKind,
    pub visits_required: usize,
    pub min_gap_days: usize,
    /// Start-time window per day.
    pub windows: Vec<TimeWindow>,
    pub service_mean: i64,
    pub service_dev: i64,
    /// Revenue per visit, indexed by caregiver.
    pub revenue: Vec<Cents>,
    /// `compatibility[k][d]`: caregiver `k` may treat this patient on day `d`.
    pub compatibility: Vec<Vec<bool>>,
    pub preassignment: Option<Preassignment>,
}

impl Patient {
    pub fn is_new(&self) -> bool {
        self.kind == PatientKind::New
    }

    pub fn is_existing(&self) -> bool {
        self.kind == PatientKind::Existing
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caregiver {
    pub id: String,
    /// Working window per day; `None` means unavailable.
    pub work_windows: Vec<Option<TimeWindow>>,
    /// Wage in cents per minute.
    pub wage_rate: Cents,
}

/// Square matrix over locations (depot plus patients).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn new(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![T::default(); dim * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, Error> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Validation("travel matrices must be square".into()));
            }
            data.extend(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> T {
        self.data[a * self.dim + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, value: T) {
        self.data[a * self.dim + b] = value;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data
            .chunks(self.dim.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TravelMatrix {
    /// Expected travel minutes.
    pub mean: Matrix<i64>,
    /// Maximum positive deviation in minutes.
    pub dev: Matrix<i64>,
    /// Travel cost per day.
    pub cost: Vec<Matrix<Cents>>,
}

impl TravelMatrix {
    #[inline]
    pub fn time(&self, a: usize, b: usize) -> i64 {
        self.mean.get(a, b)
    }

    #[inline]
    pub fn deviation(&self, a: usize, b: usize) -> i64 {
        self.dev.get(a, b)
    }

    #[inline]
    pub fn cost(&self, day: DayId, a: usize, b: usize) -> Cents {
        self.cost[day.0].get(a, b)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Budgets {
    pub gamma_p: u32,
    pub gamma_t: u32,
}

impl Budgets {
    pub const fn new(gamma_p: u32, gamma_t: u32) -> Self {
        Budgets { gamma_p, gamma_t }
    }

    /// Budgets effective on a route with `len` patients: at most `len`
    /// service deviations and `len + 1` travel deviations can occur.
    pub fn clamped(&self, len: usize) -> (usize, usize) {
        (
            (self.gamma_p as usize).min(len),
            (self.gamma_t as usize).min(len + 1),
        )
    }
}

/// Named uncertainty levels: budgets plus 20% deviations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyLevel {
    None,
    Low,
    Medium,
    High,
}

impl UncertaintyLevel {
    pub const ALL: [UncertaintyLevel; 4] = [
        UncertaintyLevel::None,
        UncertaintyLevel::Low,
        UncertaintyLevel::Medium,
        UncertaintyLevel::High,
    ];

    pub fn budgets(self) -> Budgets {
        match self {
            UncertaintyLevel::None => Budgets::new(0, 0),
            UncertaintyLevel::Low => Budgets::new(2, 2),
            UncertaintyLevel::Medium => Budgets::new(4, 4),
            UncertaintyLevel::High => Budgets::new(8, 8),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UncertaintyLevel::None => "none",
            UncertaintyLevel::Low => "low",
            UncertaintyLevel::Medium => "medium",
            UncertaintyLevel::High => "high",
        }
    }
}

impl std::str::FromStr for UncertaintyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        UncertaintyLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown uncertainty level '{s}' (none, low, medium, high)"
                ))
            })
    }
}

/// Deviation as 20% of a mean, rounded half up.
pub fn twenty_percent(mean: i64) -> i64 {
    (2 * mean + 5).div_euclid(10)
}

/// Raw problem data. Build an [`Instance`] from it to validate and index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceData {
    pub days: Vec<String>,
    pub caregivers: Vec<Caregiver>,
    pub patients: Vec<Patient>,
    pub travel: TravelMatrix,
    pub budgets: Budgets,
    pub max_patients_per_caregiver_day: usize,
}

/// Validated, immutable instance with precomputed lookup tables.
#[derive(Clone, Debug)]
pub struct Instance {
    data: InstanceData,
    existing: Vec<Vec<Vec<PatientId>>>,
    new_patients: Vec<PatientId>,
    patterns: Vec<Vec<Vec<DayId>>>,
}

impl Deref for Instance {
    type Target = InstanceData;
    fn deref(&self) -> &InstanceData {
        &self.data
    }
}

impl Instance {
    pub fn new(data: InstanceData) -> Result<Self, Error> {
        validate(&data)?;
        let n_days = data.days.len();
        let mut existing = vec![vec![Vec::new(); n_days]; data.caregivers.len()];
        let mut new_patients = Vec::new();
        for (idx, p) in data.patients.iter().enumerate() {
            let pid = PatientId(idx);
            match &p.preassignment {
                Some(pre) => {
                    for d in &pre.days {
                        existing[pre.caregiver.0][d.0].push(pid);
                    }
                }
                None => new_patients.push(pid),
            }
        }
        let patterns = data
            .patients
            .iter()
            .map(|p| day_patterns(p, n_days))
            .collect();
        Ok(Instance {
            data,
            existing,
            new_patients,
            patterns,
        })
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn into_data(self) -> InstanceData {
        self.data
    }

    /// Same instance with different uncertainty budgets.
    pub fn with_budgets(&self, budgets: Budgets) -> Instance {
        let mut copy = self.clone();
        copy.data.budgets = budgets;
        copy
    }

    pub fn n_days(&self) -> usize {
        self.data.days.len()
    }

    pub fn n_caregivers(&self) -> usize {
        self.data.caregivers.len()
    }

    pub fn n_patients(&self) -> usize {
        self.data.patients.len()
    }

    pub fn day_ids(&self) -> impl Iterator<Item = DayId> {
        (0..self.n_days()).map(DayId)
    }

    pub fn caregiver_ids(&self) -> impl Iterator<Item = CaregiverId> {
        (0..self.n_caregivers()).map(CaregiverId)
    }

    pub fn patient(&self, id: PatientId) -> &Patient {
        &self.data.patients[id.0]
    }

    pub fn caregiver(&self, id: CaregiverId) -> &Caregiver {
        &self.data.caregivers[id.0]
    }

    pub fn work_window(&self, k: CaregiverId, d: DayId) -> Option<TimeWindow> {
        self.data.caregivers[k.0].work_windows[d.0]
    }

    pub fn max_per_day(&self) -> usize {
        self.data.max_patients_per_caregiver_day
    }

    /// Existing patients preassigned to caregiver `k` on day `d`.
    pub fn existing_on(&self, k: CaregiverId, d: DayId) -> &[PatientId] {
        &self.existing[k.0][d.0]
    }

    pub fn new_patients(&self) -> &[PatientId] {
        &self.new_patients
    }

    pub fn existing_patients(&self) -> impl Iterator<Item = PatientId> + '_ {
        (0..self.n_patients())
            .map(PatientId)
            .filter(|&p| self.patient(p).is_existing())
    }

    /// Caregiver `k` works on `d` and may treat `i` that day.
    pub fn compatible(&self, i: PatientId, k: CaregiverId, d: DayId) -> bool {
        self.work_window(k, d).is_some() && self.patient(i).compatibility[k.0][d.0]
    }

    pub fn revenue(&self, k: CaregiverId, i: PatientId) -> Cents {
        self.patient(i).revenue[k.0]
    }

    pub fn window(&self, i: PatientId, d: DayId) -> TimeWindow {
        self.patient(i).windows[d.0]
    }

    /// All day patterns of patient `i` (ignoring caregiver availability).
    pub fn patterns(&self, i: PatientId) -> &[Vec<DayId>] {
        &self.patterns[i.0]
    }

    /// Day patterns of `i` whose days are all workable by caregiver `k`.
    pub fn patterns_for(&self, i: PatientId, k: CaregiverId) -> Vec<&[DayId]> {
        self.patterns(i)
            .iter()
            .filter(|pat| pat.iter().all(|&d| self.compatible(i, k, d)))
            .map(|pat| pat.as_slice())
            .collect()
    }

    pub fn patient_index(&self, id: &str) -> Option<PatientId> {
        self.data
            .patients
            .iter()
            .position(|p| p.id == id)
            .map(PatientId)
    }

    pub fn caregiver_index(&self, id: &str) -> Option<CaregiverId> {
        self.data
            .caregivers
            .iter()
            .position(|c| c.id == id)
            .map(CaregiverId)
    }

    pub fn day_index(&self, name: &str) -> Option<DayId> {
        self.data.days.iter().position(|d| d == name).map(DayId)
    }

    /// True when dropping a patient from any route can never delay the
    /// remaining visits, i.e. for all `a, i, b`:
    /// `t(a,b) <= t(a,i) + p(i) + t(i,b)` and the same with the `a -> b`
    /// deviation charged to the `a -> i` leg. Subsets of robustly feasible
    /// patient sets are then robustly feasible too.
    pub fn removal_monotone(&self) -> bool {
        let n = self.travel.mean.dim();
        let service = |loc: usize| -> i64 {
            if loc == DEPOT {
                0
            } else {
                self.data.patients[loc - 1].service_mean
            }
        };
        for a in 0..n {
            for b in 0..n {
                let direct = self.travel.time(a, b);
                let direct_dev = self.travel.deviation(a, b);
                for i in 1..n {
                    if i == a || i == b {
                        continue;
                    }
                    let via = self.travel.time(a, i) + service(i) + self.travel.time(i, b);
                    if direct > via || direct + direct_dev > via + self.travel.deviation(a, i) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn load(path: &Path) -> Result<Instance, Error> {
        let text = fs::read_to_string(path)?;
        Instance::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Instance, Error> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_instance()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(self))
            .expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Convenience wrapper matching the file-level operation name.
pub fn load_instance(path: &Path) -> Result<Instance, Error> {
    Instance::load(path)
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<(), Error> {
    inst.save(path)
}

/// All visit-day sets of size `visits_required` in which consecutive days
/// differ by at least `min_gap_days + 1`, in lexicographic order.
pub fn day_patterns(patient: &Patient, n_days: usize) -> Vec<Vec<DayId>> {
    let mut out = Vec::new();
    if patient.visits_required == 0 || patient.visits_required > n_days {
        return out;
    }
    let mut current = Vec::with_capacity(patient.visits_required);
    extend_patterns(
        patient.visits_required,
        patient.min_gap_days + 1,
        n_days,
        0,
        &mut current,
        &mut out,
    );
    out
}

fn extend_patterns(
    remaining: usize,
    step: usize,
    n_days: usize,
    first: usize,
    current: &mut Vec<DayId>,
    out: &mut Vec<Vec<DayId>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for d in first..n_days {
        // the remaining visits still have to fit after `d`
        if d + (remaining - 1) * step >= n_days {
            break;
        }
        current.push(DayId(d));
        extend_patterns(remaining - 1, step, n_days, d + step, current, out);
        current.pop();
    }
}

/// True if `days` (sorted) keeps at most one visit in every window of
/// `min_gap_days + 1` consecutive days.
pub fn respects_gap(days: &[DayId], min_gap_days: usize) -> bool {
    days.windows(2)
        .all(|w| w[1].0 > w[0].0 && w[1].0 - w[0].0 > min_gap_days)
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, Error> {
    Err(Error::Validation(msg.into()))
}

fn validate(data: &InstanceData) -> Result<(), Error> {
    let n_days = data.days.len();
    let n_k = data.caregivers.len();
    let n = data.patients.len();
    if n_days == 0 {
        return invalid("at least one day is required");
    }
    if data.max_patients_per_caregiver_day == 0 {
        return invalid("max_patients_per_caregiver_day must be positive");
    }
    let mut seen = HashSet::new();
    for d in &data.days {
        if !seen.insert(d.as_str()) {
            return invalid(format!("duplicate day '{d}'"));
        }
    }
    seen.clear();
    for c in &data.caregivers {
        if !seen.insert(c.id.as_str()) {
            return invalid(format!("duplicate caregiver id '{}'", c.id));
        }
        if c.work_windows.len() != n_days {
            return invalid(format!(
                "caregiver '{}' needs one work window entry per day",
                c.id
            ));
        }
        if c.wage_rate.0 < 0 {
            return invalid(format!("caregiver '{}': wage_rate nonnegative", c.id));
        }
        if c.work_windows.iter().flatten().any(|w| !w.is_valid()) {
            return invalid(format!(
                "caregiver '{}': work window must satisfy 0 <= lo <= hi <= 1440",
                c.id
            ));
        }
    }
    seen.clear();
    for p in &data.patients {
        if !seen.insert(p.id.as_str()) {
            return invalid(format!("duplicate patient id '{}'", p.id));
        }
        if p.windows.len() != n_days {
            return invalid(format!("patient '{}' needs one time window per day", p.id));
        }
        if p.windows.iter().any(|w| !w.is_valid()) {
            return invalid(format!(
                "patient '{}': time window must satisfy 0 <= lo <= hi <= 1440",
                p.id
            ));
        }
        if p.visits_required == 0 || p.visits_required > n_days {
            return invalid(format!(
                "patient '{}': visits_required must be in 1..=|days|",
                p.id
            ));
        }
        if p.service_mean < 0 || p.service_dev < 0 {
            return invalid(format!("patient '{}': service times nonnegative", p.id));
        }
        if p.revenue.len() != n_k {
            return invalid(format!(
                "patient '{}' needs one revenue entry per caregiver",
                p.id
            ));
        }
        if p.compatibility.len() != n_k || p.compatibility.iter().any(|row| row.len() != n_days) {
            return invalid(format!(
                "patient '{}': compatibility must be caregivers x days",
                p.id
            ));
        }
        match (&p.kind, &p.preassignment) {
            (PatientKind::New, Some(_)) => {
                return invalid(format!(
                    "new patient '{}' must not have a preassignment",
                    p.id
                ));
            }
            (PatientKind::Existing, None) => {
                return invalid(format!(
                    "existing patient '{}' requires a preassignment",
                    p.id
                ));
            }
            (PatientKind::Existing, Some(pre)) => {
                if pre.caregiver.0 >= n_k {
                    return invalid(format!(
                        "patient '{}': preassigned caregiver does not exist",
                        p.id
                    ));
                }
                if pre.days.len() != p.visits_required {
                    return invalid(format!(
                        "patient '{}': preassigned days must number visits_required",
                        p.id
                    ));
                }
                let mut days = pre.days.clone();
                days.sort();
                if days != pre.days || !respects_gap(&days, p.min_gap_days) {
                    return invalid(format!(
                        "patient '{}': preassigned days must be sorted and respect min_gap_days",
                        p.id
                    ));
                }
                for d in &days {
                    if d.0 >= n_days {
                        return invalid(format!(
                            "patient '{}': preassigned day out of range",
                            p.id
                        ));
                    }
                    let cg = &data.caregivers[pre.caregiver.0];
                    if cg.work_windows[d.0].is_none() || !p.compatibility[pre.caregiver.0][d.0] {
                        return invalid(format!(
                            "patient '{}': preassigned caregiver '{}' not compatible on day '{}'",
                            p.id, cg.id, data.days[d.0]
                        ));
                    }
                }
            }
            (PatientKind::New, None) => {}
        }
    }
    let dim = n + 1;
    let t = &data.travel;
    if t.mean.dim() != dim || t.dev.dim() != dim {
        return invalid(format!(
            "travel matrices must be {dim}x{dim} (depot plus patients)"
        ));
    }
    if t.cost.len() != n_days || t.cost.iter().any(|c| c.dim() != dim) {
        return invalid(format!("travel cost needs one {dim}x{dim} matrix per day"));
    }
    if t.mean.iter().any(|&x| x < 0)
        || t.dev.iter().any(|&x| x < 0)
        || t.cost.iter().any(|c| c.iter().any(|x| x.0 < 0))
    {
        return invalid("travel entries nonnegative");
    }
    for a in 0..dim {
        if t.mean.get(a, a) != 0
            || t.dev.get(a, a) != 0
            || t.cost.iter().any(|c| c.get(a, a).0 != 0)
        {
            return invalid("travel matrix diagonals must be zero");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    days: Vec<String>,
    caregivers: Vec<CaregiverFile>,
    patients: Vec<PatientFile>,
    travel: TravelFile,
    budgets: BudgetsFile,
    #[serde(default)]
    limits: LimitsFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaregiverFile {
    id: String,
    wage_rate: i64,
    work_windows: Vec<Option<TimeWindow>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatientFile {
    id: String,
    kind: PatientKind,
    visits_required: usize,
    #[serde(default)]
    min_gap_days: usize,
    service_mean: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service_dev: Option<i64>,
    windows: Vec<TimeWindow>,
    revenue: Vec<i64>,
    compatibility: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preassignment: Option<PreassignmentFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreassignmentFile {
    caregiver: String,
    days: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TravelFile {
    mean: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dev: Option<Vec<Vec<i64>>>,
    cost: Vec<Vec<Vec<i64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_p: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_t: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<UncertaintyLevel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsFile {
    max_patients_per_caregiver_day: usize,
}

impl Default for LimitsFile {
    fn default() -> Self {
        LimitsFile {
            max_patients_per_caregiver_day: DEFAULT_MAX_PATIENTS_PER_DAY,
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance, Error> {
        let preset = self.budgets.preset;
        let budgets = match (preset, self.budgets.gamma_p, self.budgets.gamma_t) {
            (Some(level), None, None) => level.budgets(),
            (Some(_), _, _) => {
                return invalid("budgets: give either a preset or gamma_p/gamma_t, not both")
            }
            (None, Some(gp), Some(gt)) => {
                if gp < 0 || gt < 0 {
                    return invalid("budgets nonnegative");
                }
                Budgets::new(
                    u32::try_from(gp).map_err(|_| Error::Validation("budget too large".into()))?,
                    u32::try_from(gt).map_err(|_| Error::Validation("budget too large".into()))?,
                )
            }
            _ => return invalid("budgets: gamma_p and gamma_t are both required"),
        };

        let day_of: HashMap<&str, DayId> = self
            .days
            .iter()
            .enumerate()
            .map(|(i, d)| (d.as_str(), DayId(i)))
            .collect();
        let caregiver_of: HashMap<&str, CaregiverId> = self
            .caregivers
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), CaregiverId(i)))
            .collect();

        let mut patients = Vec::with_capacity(self.patients.len());
        for p in &self.patients {
            let preassignment = match &p.preassignment {
                None => None,
                Some(pre) => {
                    let caregiver = *caregiver_of.get(pre.caregiver.as_str()).ok_or_else(|| {
                        Error::Validation(format!(
                            "patient '{}': unknown caregiver '{}'",
                            p.id, pre.caregiver
                        ))
                    })?;
                    let days = pre
                        .days
                        .iter()
                        .map(|d| {
                            day_of.get(d.as_str()).copied().ok_or_else(|| {
                                Error::Validation(format!("patient '{}': unknown day '{d}'", p.id))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(Preassignment { caregiver, days })
                }
            };
            let service_dev = match preset {
                Some(_) => twenty_percent(p.service_mean),
                None => p.service_dev.unwrap_or(0),
            };
            patients.push(Patient {
                id: p.id.clone(),
                kind: p.kind,
                visits_required: p.visits_required,
                min_gap_days: p.min_gap_days,
                windows: p.windows.clone(),
                service_mean: p.service_mean,
                service_dev,
                revenue: p.revenue.iter().map(|&r| Cents(r)).collect(),
                compatibility: p.compatibility.clone(),
                preassignment,
            });
        }

        let mean = Matrix::from_rows(self.travel.mean)?;
        let dev = match (preset, self.travel.dev) {
            (Some(_), _) => {
                let mut m = Matrix::new(mean.dim());
                for a in 0..mean.dim() {
                    for b in 0..mean.dim() {
                        m.set(a, b, twenty_percent(mean.get(a, b)));
                    }
                }
                m
            }
            (None, Some(rows)) => Matrix::from_rows(rows)?,
            (None, None) => Matrix::new(mean.dim()),
        };
        if dev.dim() != mean.dim() {
            return invalid("travel mean and dev must have equal dimensions");
        }
        let cost = self
            .travel
            .cost
            .into_iter()
            .map(|rows| {
                Matrix::from_rows(
                    rows.into_iter()
                        .map(|r| r.into_iter().map(Cents).collect())
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;

        let data = InstanceData {
            days: self.days,
            caregivers: self
                .caregivers
                .into_iter()
                .map(|c| Caregiver {
                    id: c.id,
                    work_windows: c.work_windows,
                    wage_rate: Cents(c.wage_rate),
                })
                .collect(),
            patients,
            travel: TravelMatrix { mean, dev, cost },
            budgets,
            max_patients_per_caregiver_day: self.limits.max_patients_per_caregiver_day,
        };
        Instance::new(data)
    }

    fn from_instance(inst: &Instance) -> InstanceFile {
        InstanceFile {
            days: inst.days.clone(),
            caregivers: inst
                .caregivers
                .iter()
                .map(|c| CaregiverFile {
                    id: c.id.clone(),
                    wage_rate: c.wage_rate.0,
                    work_windows: c.work_windows.clone(),
                })
                .collect(),
            patients: inst
                .patients
                .iter()
                .map(|p| PatientFile {
                    id: p.id.clone(),
                    kind: p.kind,
                    visits_required: p.visits_required,
                    min_gap_days: p.min_gap_days,
                    service_mean: p.service_mean,
                    service_dev: Some(p.service_dev),
                    windows: p.windows.clone(),
                    revenue: p.revenue.iter().map(|r| r.0).collect(),
                    compatibility: p.compatibility.clone(),
                    preassignment: p.preassignment.as_ref().map(|pre| PreassignmentFile {
                        caregiver: inst.caregivers[pre.caregiver.0].id.clone(),
                        days: pre.days.iter().map(|d| inst.days[d.0].clone()).collect(),
                    }),
                })
                .collect(),
            travel: TravelFile {
                mean: inst.travel.mean.rows(),
                dev: Some(inst.travel.dev.rows()),
                cost: inst
                    .travel
                    .cost
                    .iter()
                    .map(|m| {
                        m.rows()
                            .into_iter()
                            .map(|r| r.into_iter().map(|c| c.0).collect())
                            .collect()
                    })
                    .collect(),
            },
            budgets: BudgetsFile {
                gamma_p: Some(inst.budgets.gamma_p as i64),
                gamma_t: Some(inst.budgets.gamma_t as i64),
                preset: None,
            },
            limits: LimitsFile {
                max_patients_per_caregiver_day: inst.max_patients_per_caregiver_day,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(v: usize, gap: usize) -> Patient {
        Patient {
            id: "p".into(),
            kind: PatientKind::New,
            visits_required: v,
            min_gap_days: gap,
            windows: vec![TimeWindow::new(0, 1440); 5],
            service_mean: 30,
            service_dev: 0,
            revenue: vec![],
            compatibility: vec![],
            preassignment: None,
        }
    }

    fn as_numbers(patterns: &[Vec<DayId>]) -> Vec<Vec<usize>> {
        patterns
            .iter()
            .map(|p| p.iter().map(|d| d.0 + 1).collect())
            .collect()
    }

    /// Brute force over all subsets of the horizon.
    fn patterns_by_subset(v: usize, gap: usize, n_days: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n_days) {
            if mask.count_ones() as usize != v {
                continue;
            }
            let days: Vec<usize> = (0..n_days)
                .filter(|d| mask & (1 << d) != 0)
                .map(|d| d + 1)
                .collect();
            if days.windows(2).all(|w| w[1] - w[0] > gap) {
                out.push(days);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn single_visit_patterns_are_singletons() {
        let pats = day_patterns(&patient(1, 0), 5);
        assert_eq!(
            as_numbers(&pats),
            vec![vec![1], vec![2], vec![3], vec![4], vec![5]]
        );
    }

    #[test]
    fn two_visits_with_gap_one() {
        let pats = day_patterns(&patient(2, 1), 5);
        let expected = patterns_by_subset(2, 1, 5);
        assert_eq!(
            expected,
            vec![
                vec![1, 3],
                vec![1, 4],
                vec![1, 5],
                vec![2, 4],
                vec![2, 5],
                vec![3, 5]
            ]
        );
        assert_eq!(as_numbers(&pats), expected);
    }

    #[test]
    fn three_visits_with_gap_one() {
        let pats = day_patterns(&patient(3, 1), 5);
        assert_eq!(patterns_by_subset(3, 1, 5), vec![vec![1, 3, 5]]);
        assert_eq!(as_numbers(&pats), vec![vec![1, 3, 5]]);
    }

    #[test]
    fn patterns_match_subset_enumeration() {
        for n_days in 1..=7 {
            for v in 1..=n_days {
                for gap in 0..4 {
                    let pats = as_numbers(&day_patterns(&patient(v, gap), n_days));
                    assert_eq!(
                        pats,
                        patterns_by_subset(v, gap, n_days),
                        "v={v} gap={gap} days={n_days}"
                    );
                    for p in &pats {
                        // at most one visit in any window of gap + 1 days
                        for start in 1..=n_days {
                            let inside = p
                                .iter()
                                .filter(|&&d| d >= start && d <= start + gap)
                                .count();
                            assert!(inside <= 1);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn twenty_percent_rounds_half_up() {
        assert_eq!(twenty_percent(50), 10);
        assert_eq!(twenty_percent(23), 5);
        assert_eq!(twenty_percent(22), 4);
        assert_eq!(twenty_percent(0), 0);
    }

    #[test]
    fn budget_clamp() {
        let b = Budgets::new(8, 8);
        assert_eq!(b.clamped(3), (3, 4));
        assert_eq!(Budgets::new(1, 2).clamped(5), (1, 2));
    }
}
