//! Nested branch and price.
//!
//! Level one chooses a weekly plan per caregiver; its pricing problem is a
//! complete branch and price per caregiver (level two) over daily routes,
//! whose own pricing is [`price_day`]. Both levels branch on patients:
//! level one assigns a patient to a caregiver or rejects them, level two
//! fixes a patient's day pattern or rejects them. Branching constraints are
//! enforced by filtering columns, never by extra master rows.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heuristics::{columns_profit, greedy_plan, reject_all};
use crate::master::{reduced_cost1, solve_rmp1, solve_rmp2, DualPrices1, WeeklyColumn};
use crate::model::{CaregiverId, DayId, Instance, PatientId, DEPOT};
use crate::money::Cents;
use crate::plan::{Plan, PlanStatus};
use crate::pricing::{price_day, DayCatalog, DayPricing, PricingOptions, PricingStats};
use crate::rtsptw::{RouteCache, RoutedDay};

/// Largest number of routes enumerated for one caregiver-day.
const CATALOG_LIMIT: usize = 50_000;

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Wall-clock budget; `Some(0)` returns the heuristic incumbent at once.
    pub time_limit: Option<Duration>,
    /// Improvement tolerance for reduced costs and pricing values.
    pub eps: f64,
    /// Slack added to LP bounds before rounding down to whole cents.
    pub int_margin: f64,
    /// Drop day patterns whose days cannot fit the patient next to the
    /// caregiver's existing workload.
    pub pattern_workload_filter: bool,
    /// Drop pricing candidates with nonpositive optimistic value.
    pub preselect_positive: bool,
    /// Worker threads for per-caregiver pricing; 0 uses all cores.
    pub threads: usize,
    /// Recompute reduced costs of all stored columns after each master solve.
    pub check_duals: bool,
    /// Enumerate each caregiver-day's feasible routes up front and price by
    /// scanning them (only on removal-monotone instances).
    pub route_catalog: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            time_limit: None,
            eps: 1e-6,
            int_margin: 1e-4,
            pattern_workload_filter: false,
            preselect_positive: false,
            threads: 0,
            check_duals: false,
            route_catalog: true,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub weekly_columns: usize,
    pub route_columns: usize,
    pub nodes1: usize,
    pub nodes2: usize,
    pub rmp1_solves: usize,
    pub rmp2_solves: usize,
    pub pricing_nodes: usize,
    pub routings: usize,
    /// Largest reduced cost of a stored column right after its master solve.
    pub max_reduced_cost: f64,
    /// Largest increase of a child's LP bound over its parent's.
    pub max_bound_increase: f64,
    pub root_bound: f64,
    pub heuristic_profit: Cents,
    pub greedy_profit: Cents,
    pub elapsed: Duration,
}

impl SolveStats {
    fn absorb(&mut self, other: &SolveStats) {
        self.nodes2 += other.nodes2;
        self.rmp2_solves += other.rmp2_solves;
        self.pricing_nodes += other.pricing_nodes;
        self.routings += other.routings;
        self.max_reduced_cost = self.max_reduced_cost.max(other.max_reduced_cost);
        self.max_bound_increase = self.max_bound_increase.max(other.max_bound_increase);
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub plan: Plan,
    pub stats: SolveStats,
}

/// Optimistic profit of serving `i` with `k` on the days of `pattern`: per
/// day, revenue minus wage for service and half of the cheapest detour
/// between two other stops, minus half of the cheapest detour cost. Stops are
/// `k`'s existing patients that day, completed with the depot when fewer
/// than two exist.
pub fn val_day_pattern(
    pattern: &[DayId],
    i: PatientId,
    k: CaregiverId,
    inst: &Instance,
) -> Result<f64> {
    if !inst.patterns(i).iter().any(|p| p == pattern)
        || pattern.iter().any(|&d| !inst.compatible(i, k, d))
    {
        return Err(Error::InvalidPattern(i));
    }
    let p = inst.patient(i);
    let wage = inst.caregiver(k).wage_rate.as_f64();
    let mut total = 0.0;
    for &d in pattern {
        let stops: Vec<usize> = inst
            .existing_on(k, d)
            .iter()
            .filter(|&&j| j != i)
            .map(|j| j.loc())
            .collect();
        let pairs: Vec<(usize, usize)> = match stops.len() {
            0 => vec![(DEPOT, DEPOT)],
            1 => vec![(stops[0], DEPOT), (DEPOT, stops[0])],
            _ => stops
                .iter()
                .flat_map(|&a| stops.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
                .collect(),
        };
        let detour_time = pairs
            .iter()
            .map(|&(a, b)| inst.travel.time(a, i.loc()) + inst.travel.time(i.loc(), b))
            .min()
            .expect("at least one pair");
        let detour_cost = pairs
            .iter()
            .map(|&(a, b)| (inst.travel.cost(d, a, i.loc()) + inst.travel.cost(d, i.loc(), b)).0)
            .min()
            .expect("at least one pair");
        total += inst.revenue(k, i).as_f64()
            - wage * (p.service_mean as f64 + 0.5 * detour_time as f64)
            - 0.5 * detour_cost as f64;
    }
    Ok(total)
}

/// Day patterns of `i` usable by `k`, optionally without patterns whose days
/// are overloaded by the existing visits.
pub fn usable_patterns(
    inst: &Instance,
    i: PatientId,
    k: CaregiverId,
    workload_filter: bool,
) -> Vec<Vec<DayId>> {
    inst.patterns_for(i, k)
        .into_iter()
        .filter(|pat| !workload_filter || pat.iter().all(|&d| fits_workload(inst, i, k, d)))
        .map(|pat| pat.to_vec())
        .collect()
}

fn fits_workload(inst: &Instance, i: PatientId, k: CaregiverId, d: DayId) -> bool {
    let Some(shift) = inst.work_window(k, d) else {
        return false;
    };
    let mut stops: Vec<PatientId> = inst.existing_on(k, d).to_vec();
    stops.push(i);
    let load: i64 = stops
        .iter()
        .map(|&a| {
            let out = stops
                .iter()
                .filter(|&&b| b != a)
                .map(|b| inst.travel.time(a.loc(), b.loc()))
                .chain(std::iter::once(inst.travel.time(a.loc(), DEPOT)))
                .min()
                .expect("depot is a target");
            inst.patient(a).service_mean + out
        })
        .sum();
    load <= shift.width()
}

/// Level-one branching decision: the patient with the largest assignment
/// bound among `fractional`, and its children ordered by descending bound.
/// `None` as a child means rejection.
pub fn branch_level1(
    inst: &Instance,
    fractional: &[PatientId],
    options: &[(PatientId, Vec<CaregiverId>)],
    workload_filter: bool,
) -> Result<(PatientId, Vec<(Option<CaregiverId>, f64)>)> {
    let mut best: Option<(f64, PatientId, Vec<(Option<CaregiverId>, f64)>)> = None;
    for &i in fractional {
        let allowed = options
            .iter()
            .find(|(p, _)| *p == i)
            .map(|(_, ks)| ks.as_slice())
            .unwrap_or(&[]);
        let mut children = Vec::new();
        for &k in allowed {
            let ub = usable_patterns(inst, i, k, workload_filter)
                .iter()
                .map(|pat| val_day_pattern(pat, i, k, inst))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if ub > f64::NEG_INFINITY {
                children.push((Some(k), ub));
            }
        }
        let top = children
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max);
        children.push((None, 0.0));
        if best.as_ref().is_none_or(|(b, _, _)| top > *b) {
            best = Some((top, i, children));
        }
    }
    let (_, i, mut children) = best.ok_or(Error::NoFractionalPatient)?;
    children.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok((i, children))
}

/// Level-two branching decision over day patterns. Rejection is offered
/// only when `may_reject` holds for the chosen patient.
pub fn branch_level2(
    inst: &Instance,
    k: CaregiverId,
    fractional: &[PatientId],
    may_reject: impl Fn(PatientId) -> bool,
    workload_filter: bool,
) -> Result<(PatientId, Vec<(Option<Vec<DayId>>, f64)>)> {
    let mut best: Option<(f64, PatientId, Vec<(Option<Vec<DayId>>, f64)>)> = None;
    for &i in fractional {
        let mut children = Vec::new();
        for pat in usable_patterns(inst, i, k, workload_filter) {
            let ub = val_day_pattern(&pat, i, k, inst)?;
            children.push((Some(pat), ub));
        }
        let top = children
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if may_reject(i) {
            children.push((None, 0.0));
        }
        if best.as_ref().is_none_or(|(b, _, _)| top > *b) {
            best = Some((top, i, children));
        }
    }
    let (_, i, mut children) = best.ok_or(Error::NoFractionalPatient)?;
    children.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok((i, children))
}

fn is_fractional(x: f64) -> bool {
    (x - x.round()).abs() > 1e-6
}

struct Clock {
    deadline: Option<Instant>,
}

impl Clock {
    fn check(&self) -> Result<()> {
        match self.deadline {
            Some(t) if Instant::now() >= t => Err(Error::TimeLimitReached),
            _ => Ok(()),
        }
    }
}

/// Daily route pool of one caregiver, shared by all level-two searches.
#[derive(Default)]
struct RoutePool {
    days: Vec<Vec<Arc<RoutedDay>>>,
    seen: Vec<HashSet<Vec<PatientId>>>,
}

impl RoutePool {
    fn new(n_days: usize) -> Self {
        RoutePool {
            days: vec![Vec::new(); n_days],
            seen: vec![HashSet::new(); n_days],
        }
    }

    fn add(&mut self, r: Arc<RoutedDay>) -> bool {
        let d = r.day.0;
        if self.seen[d].insert(r.covered.clone()) {
            self.days[d].push(r);
            true
        } else {
            false
        }
    }

    fn len(&self) -> usize {
        self.days.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Fix2 {
    Pattern(Vec<DayId>),
    Rejected,
}

/// One level-two branch and price for caregiver `k`.
struct Level2<'a> {
    inst: &'a Instance,
    k: CaregiverId,
    cfg: &'a SolveConfig,
    cache: &'a RouteCache,
    clock: &'a Clock,
    /// Subsets of robustly feasible visit sets stay feasible.
    monotone: bool,
    /// Route catalogs of this caregiver per day, when enumerable.
    catalogs: &'a [Option<DayCatalog>],
    /// New patients the first level lets this caregiver serve.
    allowed: Vec<PatientId>,
    /// New patients the first level assigned to this caregiver.
    forced: Vec<PatientId>,
    w: Vec<f64>,
    /// Only plans with `f > threshold` are of interest.
    threshold: f64,
    best: Option<(f64, Vec<Option<Arc<RoutedDay>>>)>,
    stats: SolveStats,
}

impl Level2<'_> {
    fn cut(&self) -> f64 {
        match &self.best {
            Some((f, _)) => f.max(self.threshold),
            None => self.threshold,
        }
    }

    fn patterns(&self, i: PatientId) -> Vec<Vec<DayId>> {
        usable_patterns(self.inst, i, self.k, self.cfg.pattern_workload_filter)
    }

    fn run(&mut self, pool: &mut RoutePool) -> Result<()> {
        let mut fix = Vec::new();
        self.node(pool, &mut fix, None)
    }

    fn node(
        &mut self,
        pool: &mut RoutePool,
        fix: &mut Vec<(PatientId, Fix2)>,
        parent_bound: Option<f64>,
    ) -> Result<()> {
        if self.best.is_some() {
            return Ok(());
        }
        self.clock.check()?;
        self.stats.nodes2 += 1;
        let inst = self.inst;
        let k = self.k;
        let fixed = |i: PatientId| fix.iter().find(|(p, _)| *p == i).map(|(_, f)| f);

        // route space per day
        let relevant: Vec<PatientId> = self
            .allowed
            .iter()
            .copied()
            .filter(|&i| fixed(i) != Some(&Fix2::Rejected) && !self.patterns(i).is_empty())
            .collect();
        let mut mandatory: Vec<Vec<PatientId>> = vec![Vec::new(); inst.n_days()];
        let mut candidates: Vec<Vec<PatientId>> = vec![Vec::new(); inst.n_days()];
        for d in inst.day_ids() {
            if inst.work_window(k, d).is_none() {
                continue;
            }
            mandatory[d.0] = inst.existing_on(k, d).to_vec();
            for &i in &relevant {
                match fixed(i) {
                    Some(Fix2::Pattern(days)) => {
                        if days.contains(&d) {
                            mandatory[d.0].push(i);
                        }
                    }
                    Some(Fix2::Rejected) => {}
                    None => {
                        if self.patterns(i).iter().any(|p| p.contains(&d)) {
                            candidates[d.0].push(i);
                        }
                    }
                }
            }
        }
        for d in inst.day_ids() {
            if inst.work_window(k, d).is_none() {
                continue;
            }
            match self.cache.get_or_solve(k, d, &mandatory[d.0], inst) {
                Ok(Some(r)) => {
                    pool.add(r);
                }
                Ok(None) | Err(Error::TooManyPatients { .. }) => return Ok(()),
                Err(e) => return Err(e),
            }
        }
        let admits = |r: &RoutedDay, d: usize| {
            mandatory[d].iter().all(|&m| r.visits(m))
                && r.route
                    .iter()
                    .all(|&p| mandatory[d].contains(&p) || candidates[d].contains(&p))
        };
        let mut columns: Vec<Vec<Arc<RoutedDay>>> = (0..inst.n_days())
            .map(|d| {
                pool.days[d]
                    .iter()
                    .filter(|r| admits(r, d))
                    .cloned()
                    .collect()
            })
            .collect();

        // column generation
        let options = PricingOptions {
            eps: self.cfg.eps,
            preselect_positive: self.cfg.preselect_positive,
            prune_infeasible_forced: self.monotone,
        };
        let rmp = loop {
            self.clock.check()?;
            let rmp = solve_rmp2(inst, k, &columns, &self.w, &relevant)?;
            self.stats.rmp2_solves += 1;
            if self.cfg.check_duals {
                for r in columns.iter().flatten() {
                    let rc = rmp.duals.reduced_cost(r, &self.w, inst);
                    self.stats.max_reduced_cost = self.stats.max_reduced_cost.max(rc);
                }
            }
            let mut added = false;
            for d in inst.day_ids() {
                if inst.work_window(k, d).is_none() {
                    continue;
                }
                let ctx = DayPricing {
                    inst,
                    k,
                    d,
                    mandatory: &mandatory[d.0],
                    candidates: &candidates[d.0],
                    duals: &rmp.duals,
                    w: &self.w,
                    cache: self.cache,
                    catalog: self.catalogs[d.0].as_ref(),
                    options,
                };
                let mut ps = PricingStats::default();
                let found = price_day(&ctx, &mut ps)?;
                self.stats.pricing_nodes += ps.nodes;
                self.stats.routings += ps.routings;
                if let Some(r) = found {
                    if !columns[d.0].iter().any(|c| c.covered == r.covered) {
                        pool.add(Arc::clone(&r));
                        columns[d.0].push(r);
                        added = true;
                    }
                }
            }
            if !added {
                break rmp;
            }
        };
        let bound = rmp.objective;
        if let Some(pb) = parent_bound {
            self.stats.max_bound_increase = self.stats.max_bound_increase.max(bound - pb);
        }
        if bound <= self.cut() {
            return Ok(());
        }

        // integrality is read off the visit coverage
        let mut fractional = Vec::new();
        for &i in &relevant {
            if inst
                .day_ids()
                .any(|d| is_fractional(rmp.coverage(&columns, i, d)))
            {
                fractional.push(i);
            }
        }
        if fractional.is_empty() {
            let mut days: Vec<Option<Arc<RoutedDay>>> = vec![None; inst.n_days()];
            for d in inst.day_ids() {
                if inst.work_window(k, d).is_none() {
                    continue;
                }
                let pick = columns[d.0]
                    .iter()
                    .zip(&rmp.lambda[d.0])
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(r, _)| Arc::clone(r))
                    .expect("every working day has a column");
                days[d.0] = Some(pick);
            }
            let col = WeeklyColumn::new(k, days.clone(), inst);
            if let Some(&missing) = self.forced.iter().find(|&&i| !col.covers(i)) {
                // a forced patient left out: split over its patterns only
                return self.children(pool, fix, missing, false, bound);
            }
            let f = col.value.as_f64() - col.coverage.iter().map(|i| self.w[i.0]).sum::<f64>();
            if f > self.cut() {
                self.best = Some((f, days));
            }
            return Ok(());
        }
        let forced = self.forced.clone();
        let (i, _) = branch_level2(
            inst,
            k,
            &fractional,
            |p| !forced.contains(&p),
            self.cfg.pattern_workload_filter,
        )?;
        let may_reject = !self.forced.contains(&i);
        self.children(pool, fix, i, may_reject, bound)
    }

    fn children(
        &mut self,
        pool: &mut RoutePool,
        fix: &mut Vec<(PatientId, Fix2)>,
        i: PatientId,
        may_reject: bool,
        bound: f64,
    ) -> Result<()> {
        let (_, children) = branch_level2(
            self.inst,
            self.k,
            &[i],
            |_| may_reject,
            self.cfg.pattern_workload_filter,
        )?;
        for (child, _) in children {
            let f = match child {
                Some(pat) => Fix2::Pattern(pat),
                None => Fix2::Rejected,
            };
            fix.push((i, f));
            let res = self.node(pool, fix, Some(bound));
            fix.pop();
            res?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fix1 {
    Free,
    Caregiver(CaregiverId),
    Rejected,
}

struct Level1<'a> {
    inst: &'a Instance,
    cfg: &'a SolveConfig,
    cache: RouteCache,
    clock: Clock,
    monotone: bool,
    /// `catalogs[k][d]`
    catalogs: Vec<Vec<Option<DayCatalog>>>,
    columns: Vec<Vec<Arc<WeeklyColumn>>>,
    routes: Vec<RoutePool>,
    incumbent: (Cents, Vec<Arc<WeeklyColumn>>),
    stats: SolveStats,
}

fn same_column(a: &WeeklyColumn, b: &WeeklyColumn) -> bool {
    a.days.len() == b.days.len()
        && a.days.iter().zip(&b.days).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x.covered == y.covered,
            (None, None) => true,
            _ => false,
        })
}

impl<'a> Level1<'a> {
    fn admits(col: &WeeklyColumn, fix: &[Fix1]) -> bool {
        fix.iter().enumerate().all(|(i, f)| {
            let covers = col.covers(PatientId(i));
            match *f {
                Fix1::Free => true,
                Fix1::Rejected => !covers,
                Fix1::Caregiver(k) => covers == (col.caregiver == k),
            }
        })
    }

    fn allowed(&self, k: CaregiverId, fix: &[Fix1]) -> (Vec<PatientId>, Vec<PatientId>) {
        let mut allowed = Vec::new();
        let mut forced = Vec::new();
        for &i in self.inst.new_patients() {
            if usable_patterns(self.inst, i, k, self.cfg.pattern_workload_filter).is_empty() {
                continue;
            }
            match fix[i.0] {
                Fix1::Free => allowed.push(i),
                Fix1::Caregiver(kk) if kk == k => {
                    allowed.push(i);
                    forced.push(i);
                }
                _ => {}
            }
        }
        (allowed, forced)
    }

    fn add_column(&mut self, col: Arc<WeeklyColumn>) -> bool {
        let k = col.caregiver.0;
        if self.columns[k].iter().any(|c| same_column(c, &col)) {
            return false;
        }
        self.columns[k].push(col);
        self.stats.weekly_columns += 1;
        true
    }

    fn level2(
        &self,
        k: CaregiverId,
        allowed: Vec<PatientId>,
        forced: Vec<PatientId>,
        w: Vec<f64>,
        threshold: f64,
        pool: &mut RoutePool,
    ) -> Result<(Option<Arc<WeeklyColumn>>, SolveStats)> {
        let mut l2 = Level2 {
            inst: self.inst,
            k,
            cfg: self.cfg,
            cache: &self.cache,
            clock: &self.clock,
            monotone: self.monotone,
            catalogs: &self.catalogs[k.0],
            allowed,
            forced,
            w,
            threshold,
            best: None,
            stats: SolveStats::default(),
        };
        l2.run(pool)?;
        let col = l2
            .best
            .take()
            .map(|(_, days)| Arc::new(WeeklyColumn::new(k, days, self.inst)));
        Ok((col, l2.stats))
    }

    fn node(&mut self, fix: &mut Vec<Fix1>, parent_bound: Option<f64>) -> Result<()> {
        self.clock.check()?;
        self.stats.nodes1 += 1;
        let inst = self.inst;
        let nk = inst.n_caregivers();

        // every caregiver needs a column serving exactly its forced patients,
        // so the master has a feasible point
        for k in inst.caregiver_ids() {
            let (_, forced) = self.allowed(k, fix);
            if self.columns[k.0]
                .iter()
                .any(|c| Self::admits(c, fix) && c.coverage == forced)
            {
                continue;
            }
            let mut pool = std::mem::take(&mut self.routes[k.0]);
            let res = self.level2(
                k,
                forced.clone(),
                forced,
                vec![0.0; inst.n_patients()],
                f64::NEG_INFINITY,
                &mut pool,
            );
            self.routes[k.0] = pool;
            let (col, st) = res?;
            self.stats.absorb(&st);
            match col {
                Some(c) => {
                    self.add_column(c);
                }
                None => return Ok(()),
            }
        }

        let rmp = loop {
            self.clock.check()?;
            let node_cols: Vec<Vec<Arc<WeeklyColumn>>> = self
                .columns
                .iter()
                .map(|cs| {
                    cs.iter()
                        .filter(|c| Self::admits(c, fix))
                        .cloned()
                        .collect()
                })
                .collect();
            let rmp = solve_rmp1(inst, &node_cols)?;
            self.stats.rmp1_solves += 1;
            if self.cfg.check_duals {
                for c in node_cols.iter().flatten() {
                    self.stats.max_reduced_cost = self
                        .stats
                        .max_reduced_cost
                        .max(reduced_cost1(c, &rmp.duals));
                }
            }
            let DualPrices1 { v, w } = &rmp.duals;
            let jobs: Vec<(CaregiverId, Vec<PatientId>, Vec<PatientId>, f64)> = inst
                .caregiver_ids()
                .map(|k| {
                    let (allowed, forced) = self.allowed(k, fix);
                    (k, allowed, forced, v[k.0] + self.cfg.eps)
                })
                .collect();
            let mut pools: Vec<RoutePool> = self.routes.iter_mut().map(std::mem::take).collect();
            let this = &*self;
            let results: Vec<Result<(Option<Arc<WeeklyColumn>>, SolveStats)>> = jobs
                .into_par_iter()
                .zip(pools.par_iter_mut())
                .map(|((k, allowed, forced, threshold), pool)| {
                    this.level2(k, allowed, forced, w.clone(), threshold, pool)
                })
                .collect();
            self.routes = pools;
            let mut added = false;
            for res in results {
                let (col, st) = res?;
                self.stats.absorb(&st);
                if let Some(c) = col {
                    if Self::admits(&c, fix) && self.add_column(c) {
                        added = true;
                    }
                }
            }
            if !added {
                break (rmp, node_cols);
            }
        };
        let (rmp, node_cols) = rmp;
        let bound = rmp.objective;
        match parent_bound {
            Some(pb) => {
                self.stats.max_bound_increase = self.stats.max_bound_increase.max(bound - pb)
            }
            None => self.stats.root_bound = bound,
        }
        self.stats.route_columns = self.routes.iter().map(RoutePool::len).sum();
        debug!(
            "level-1 node {} bound {:.2} incumbent {}",
            self.stats.nodes1, bound, self.incumbent.0
        );
        if ((bound + self.cfg.int_margin).floor() as i64) <= self.incumbent.0 .0 {
            return Ok(());
        }

        let mut fractional = Vec::new();
        for &i in inst.new_patients() {
            let frac = (0..nk).any(|k| {
                let c: f64 = node_cols[k]
                    .iter()
                    .zip(&rmp.lambda[k])
                    .filter(|(c, _)| c.covers(i))
                    .map(|(_, &l)| l)
                    .sum();
                is_fractional(c)
            });
            if frac {
                fractional.push(i);
            }
        }
        if fractional.is_empty() {
            let pick: Vec<Arc<WeeklyColumn>> = (0..nk)
                .map(|k| {
                    node_cols[k]
                        .iter()
                        .zip(&rmp.lambda[k])
                        .filter(|(_, &l)| l > 1e-6)
                        .max_by_key(|(c, _)| c.value)
                        .map(|(c, _)| Arc::clone(c))
                        .expect("convexity row is satisfied")
                })
                .collect();
            let profit = columns_profit(&pick);
            if profit > self.incumbent.0 {
                info!(
                    "new incumbent {profit} at level-1 node {}",
                    self.stats.nodes1
                );
                self.incumbent = (profit, pick);
            }
            return Ok(());
        }

        let options: Vec<(PatientId, Vec<CaregiverId>)> = fractional
            .iter()
            .map(|&i| {
                let ks = inst
                    .caregiver_ids()
                    .filter(|&k| {
                        !usable_patterns(inst, i, k, self.cfg.pattern_workload_filter).is_empty()
                    })
                    .collect();
                (i, ks)
            })
            .collect();
        let (i, children) = branch_level1(
            inst,
            &fractional,
            &options,
            self.cfg.pattern_workload_filter,
        )?;
        for (child, _) in children {
            fix[i.0] = match child {
                Some(k) => Fix1::Caregiver(k),
                None => Fix1::Rejected,
            };
            let res = self.node(fix, Some(bound));
            fix[i.0] = Fix1::Free;
            res?;
        }
        Ok(())
    }
}

/// Solves the instance to optimality, or returns the best plan found within
/// the time limit.
pub fn solve(inst: &Instance, config: &SolveConfig) -> Result<SolveOutcome> {
    let started = Instant::now();
    let cache = RouteCache::new();
    let base = reject_all(inst, &cache)?;
    let greedy = greedy_plan(inst, &cache)?;
    let base_profit = columns_profit(&base);
    let greedy_profit = columns_profit(&greedy);
    let mut stats = SolveStats {
        heuristic_profit: base_profit.max(greedy_profit),
        greedy_profit,
        ..SolveStats::default()
    };
    let incumbent = if greedy_profit > base_profit {
        greedy.clone()
    } else {
        base.clone()
    };

    if config.time_limit == Some(Duration::ZERO) {
        stats.elapsed = started.elapsed();
        return Ok(SolveOutcome {
            plan: Plan::from_columns(inst, &incumbent, PlanStatus::TimeLimit),
            stats,
        });
    }

    let monotone = inst.removal_monotone();
    let mut catalogs = Vec::with_capacity(inst.n_caregivers());
    for k in inst.caregiver_ids() {
        let mut per_day = Vec::with_capacity(inst.n_days());
        for d in inst.day_ids() {
            per_day.push(
                match config.route_catalog && monotone && inst.work_window(k, d).is_some() {
                    true => DayCatalog::build(k, d, inst, &cache, CATALOG_LIMIT)?,
                    false => None,
                },
            );
        }
        catalogs.push(per_day);
    }
    debug!(
        "route catalogs: {:?}",
        catalogs
            .iter()
            .map(|c| c
                .iter()
                .map(|x| x.as_ref().map_or(0, DayCatalog::len))
                .collect::<Vec<_>>())
            .collect::<Vec<_>>()
    );
    let mut search = Level1 {
        inst,
        cfg: config,
        cache,
        clock: Clock {
            deadline: config.time_limit.map(|t| started + t),
        },
        monotone,
        catalogs,
        columns: vec![Vec::new(); inst.n_caregivers()],
        routes: (0..inst.n_caregivers())
            .map(|_| RoutePool::new(inst.n_days()))
            .collect(),
        incumbent: (columns_profit(&incumbent), incumbent),
        stats,
    };
    for col in base.into_iter().chain(greedy) {
        search.add_column(col);
    }
    let mut fix = vec![Fix1::Free; inst.n_patients()];
    let run = if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        pool.install(|| search.node(&mut fix, None))
    } else {
        search.node(&mut fix, None)
    };
    let status = match run {
        Ok(()) => PlanStatus::Optimal,
        Err(Error::TimeLimitReached) => PlanStatus::TimeLimit,
        Err(e) => return Err(e),
    };
    let mut stats = search.stats;
    stats.route_columns = search.routes.iter().map(RoutePool::len).sum();
    stats.elapsed = started.elapsed();
    let plan = Plan::from_columns(inst, &search.incumbent.1, status);
    info!(
        "solved: profit {} status {:?} nodes {}/{} columns {}/{} in {:.2?}",
        plan.profit,
        status,
        stats.nodes1,
        stats.nodes2,
        stats.weekly_columns,
        stats.route_columns,
        stats.elapsed
    );
    Ok(SolveOutcome { plan, stats })
}
