//! Route pricing for one caregiver-day.
//!
//! Every visit is charged an optimistic value `vbar`: its revenue minus the
//! cheapest possible incoming arc, the wage for its service plus the shortest
//! outgoing trip, and its dual price. Summed over a route this bounds the
//! route's pricing value from above, so a knapsack over `vbar` (with count
//! and workload capacities) bounds every route reachable from a search node.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::master::DualPrices2;
use crate::model::{CaregiverId, DayId, Instance, PatientId, DEPOT};
use crate::rtsptw::{RouteCache, RoutedDay};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatientValueBound {
    pub patient: PatientId,
    pub vbar: f64,
    /// Workload lower bound in minutes: service plus shortest outgoing trip.
    pub load: i64,
}

/// Locations that may precede or follow a visit: `neighbors` plus the depot.
fn shortest_legs(i: PatientId, d: DayId, neighbors: &[PatientId], inst: &Instance) -> (i64, i64) {
    let others = neighbors
        .iter()
        .filter(|&&j| j != i)
        .map(|j| j.loc())
        .chain(std::iter::once(DEPOT));
    let mut out_time = i64::MAX;
    let mut in_cost = i64::MAX;
    for j in others {
        out_time = out_time.min(inst.travel.time(i.loc(), j));
        in_cost = in_cost.min(inst.travel.cost(d, j, i.loc()).0);
    }
    (out_time, in_cost)
}

/// Optimistic value of visiting `i` with caregiver `k` on day `d`, where
/// `neighbors` are the other patients that may share the route.
pub fn value_bound(
    i: PatientId,
    k: CaregiverId,
    d: DayId,
    neighbors: &[PatientId],
    duals: &DualPrices2,
    w: &[f64],
    inst: &Instance,
) -> Result<PatientValueBound> {
    if !inst.compatible(i, k, d) {
        return Err(Error::IncompatiblePatient {
            patient: i,
            caregiver: k,
            day: d,
        });
    }
    let (out_time, in_cost) = shortest_legs(i, d, neighbors, inst);
    let p = inst.patient(i);
    let load = p.service_mean + out_time;
    let wage = inst.caregiver(k).wage_rate.0 * load;
    let vbar = (inst.revenue(k, i).0 - wage - in_cost) as f64 - duals.penalty(i, d, w, inst);
    Ok(PatientValueBound {
        patient: i,
        vbar,
        load,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum KnapsackOutcome {
    /// Bound over mandatory plus selected candidates, and the selection.
    Bound(f64, Vec<PatientId>),
    Infeasible,
}

/// Maximizes the summed `vbar` of the mandatory visits plus a subset of the
/// candidates under the count limit and the shift-length workload capacity.
/// `fixed_in` candidates are always taken and `fixed_out` never.
pub fn knapsack_bound(
    mandatory: &[PatientValueBound],
    candidates: &[PatientValueBound],
    fixed_in: &[PatientId],
    fixed_out: &[PatientId],
    k: CaregiverId,
    d: DayId,
    inst: &Instance,
) -> KnapsackOutcome {
    let Some(shift) = inst.work_window(k, d) else {
        return KnapsackOutcome::Infeasible;
    };
    let mut base = 0.0;
    let mut count = 0usize;
    let mut load = 0i64;
    let mut selection = Vec::new();
    for m in mandatory {
        base += m.vbar;
        count += 1;
        load += m.load;
    }
    let mut free = Vec::new();
    for c in candidates {
        if fixed_in.contains(&c.patient) {
            base += c.vbar;
            count += 1;
            load += c.load;
            selection.push(c.patient);
        } else if !fixed_out.contains(&c.patient) && c.vbar > 0.0 {
            free.push(*c);
        }
    }
    let cap_count = inst.max_per_day();
    let cap_load = shift.width();
    if count > cap_count || load > cap_load {
        return KnapsackOutcome::Infeasible;
    }
    let slots = cap_count - count;
    let room = (cap_load - load) as usize;
    if slots == 0 || free.is_empty() {
        selection.sort();
        return KnapsackOutcome::Bound(base, selection);
    }

    // best[c][l]: best value using exactly c items with total load exactly l
    let width = room + 1;
    let mut best = vec![f64::NEG_INFINITY; (slots + 1) * width];
    best[0] = 0.0;
    let mut took = vec![false; free.len() * (slots + 1) * width];
    for (it, item) in free.iter().enumerate() {
        let wgt = item.load.max(0) as usize;
        if wgt > room {
            continue;
        }
        for c in (1..=slots).rev() {
            for l in (wgt..=room).rev() {
                let prev = best[(c - 1) * width + l - wgt];
                if prev > f64::NEG_INFINITY && prev + item.vbar > best[c * width + l] {
                    best[c * width + l] = prev + item.vbar;
                    took[(it * (slots + 1) + c) * width + l] = true;
                }
            }
        }
    }
    let mut arg = (0usize, 0usize);
    for c in 0..=slots {
        for l in 0..=room {
            if best[c * width + l] > best[arg.0 * width + arg.1] {
                arg = (c, l);
            }
        }
    }
    let total = best[arg.0 * width + arg.1];
    let (mut c, mut l) = arg;
    for it in (0..free.len()).rev() {
        if c > 0 && took[(it * (slots + 1) + c) * width + l] {
            selection.push(free[it].patient);
            l -= free[it].load.max(0) as usize;
            c -= 1;
        }
    }
    selection.sort();
    KnapsackOutcome::Bound(base + total, selection)
}

#[derive(Clone, Copy, Debug)]
pub struct PricingOptions {
    pub eps: f64,
    /// Drop candidates whose optimistic value is not positive.
    pub preselect_positive: bool,
    /// Prune subtrees whose forced visits are already unroutable. Only sound
    /// for removal-monotone instances.
    pub prune_infeasible_forced: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions {
            eps: 1e-6,
            preselect_positive: false,
            prune_infeasible_forced: false,
        }
    }
}

/// Everything that shapes the route space of one caregiver-day.
pub struct DayPricing<'a> {
    pub inst: &'a Instance,
    pub k: CaregiverId,
    pub d: DayId,
    /// Visits every route must contain.
    pub mandatory: &'a [PatientId],
    /// New patients that may be added.
    pub candidates: &'a [PatientId],
    pub duals: &'a DualPrices2,
    pub w: &'a [f64],
    pub cache: &'a RouteCache,
    /// Complete route list of the day; replaces the search when present.
    pub catalog: Option<&'a DayCatalog>,
    pub options: PricingOptions,
}

#[derive(Clone, Debug, Default)]
pub struct PricingStats {
    pub nodes: usize,
    pub routings: usize,
}

/// Every robustly feasible route of one caregiver-day that keeps the
/// caregiver's existing visits, with visit sets as bit masks over a local
/// patient index.
pub struct DayCatalog {
    universe: Vec<PatientId>,
    routes: Vec<(u128, Arc<RoutedDay>)>,
}

impl DayCatalog {
    pub const MAX_UNIVERSE: usize = 128;

    /// Enumerates all feasible supersets of the existing visits built from
    /// new patients compatible on `d`. Extends only feasible sets, so it is
    /// complete only when the instance is removal-monotone. Gives `None` when
    /// the universe or the number of routes exceeds the limits.
    pub fn build(
        k: CaregiverId,
        d: DayId,
        inst: &Instance,
        cache: &RouteCache,
        max_routes: usize,
    ) -> Result<Option<DayCatalog>> {
        let base = inst.existing_on(k, d).to_vec();
        let extra: Vec<PatientId> = inst
            .new_patients()
            .iter()
            .copied()
            .filter(|&i| inst.compatible(i, k, d))
            .collect();
        let mut universe = base.clone();
        universe.extend_from_slice(&extra);
        if universe.len() > Self::MAX_UNIVERSE {
            return Ok(None);
        }
        let mut cat = DayCatalog {
            universe,
            routes: Vec::new(),
        };
        if base.len() > inst.max_per_day() {
            return Ok(Some(cat));
        }
        let Some(root) = cache.get_or_solve(k, d, &base, inst)? else {
            return Ok(Some(cat));
        };
        let base_mask = (0..base.len()).fold(0u128, |m, b| m | 1 << b);
        cat.routes.push((base_mask, root));
        let mut set = base;
        let offset = cat.universe.len() - extra.len();
        if !cat.extend(k, d, inst, cache, &mut set, base_mask, offset, max_routes)? {
            return Ok(None);
        }
        Ok(Some(cat))
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &mut self,
        k: CaregiverId,
        d: DayId,
        inst: &Instance,
        cache: &RouteCache,
        set: &mut Vec<PatientId>,
        mask: u128,
        from: usize,
        max_routes: usize,
    ) -> Result<bool> {
        if set.len() >= inst.max_per_day() {
            return Ok(true);
        }
        for idx in from..self.universe.len() {
            set.push(self.universe[idx]);
            let found = cache.get_or_solve(k, d, set, inst)?;
            if let Some(r) = found {
                if self.routes.len() >= max_routes {
                    return Ok(false);
                }
                let m = mask | 1 << idx;
                self.routes.push((m, r));
                if !self.extend(k, d, inst, cache, set, m, idx + 1, max_routes)? {
                    return Ok(false);
                }
            }
            set.pop();
        }
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    fn mask_of(&self, patients: &[PatientId]) -> Option<u128> {
        patients.iter().try_fold(0u128, |m, p| {
            self.universe
                .iter()
                .position(|u| u == p)
                .map(|b| m | 1 << b)
        })
    }

    /// Best route containing all of `mandatory`, otherwise drawing only
    /// from `candidates`, if its pricing value beats `threshold`.
    fn price(&self, ctx: &DayPricing<'_>, threshold: f64) -> Option<Arc<RoutedDay>> {
        let must = self.mask_of(ctx.mandatory)?;
        let allowed = must | self.mask_of(ctx.candidates).unwrap_or(0);
        let penalty: Vec<f64> = self
            .universe
            .iter()
            .map(|&i| ctx.duals.penalty(i, ctx.d, ctx.w, ctx.inst))
            .collect();
        let mut best: Option<(f64, &Arc<RoutedDay>)> = None;
        for (mask, route) in &self.routes {
            if mask & must != must || mask & !allowed != 0 {
                continue;
            }
            let mut bits = *mask;
            let mut value = route.value().as_f64();
            while bits != 0 {
                value -= penalty[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            if value > threshold && best.is_none_or(|(b, _)| value > b) {
                best = Some((value, route));
            }
        }
        best.map(|(_, r)| Arc::clone(r))
    }
}

/// Finds a route whose pricing value exceeds the day's dual `u_d`, or proves
/// that none exists.
pub fn price_day(ctx: &DayPricing<'_>, stats: &mut PricingStats) -> Result<Option<Arc<RoutedDay>>> {
    let inst = ctx.inst;
    if let Some(cat) = ctx.catalog {
        stats.nodes += 1;
        return Ok(cat.price(ctx, ctx.duals.u[ctx.d.0] + ctx.options.eps));
    }
    let neighbors: Vec<PatientId> = ctx
        .mandatory
        .iter()
        .chain(ctx.candidates)
        .copied()
        .collect();
    let mandatory = ctx
        .mandatory
        .iter()
        .map(|&i| value_bound(i, ctx.k, ctx.d, &neighbors, ctx.duals, ctx.w, inst))
        .collect::<Result<Vec<_>>>()?;
    let mut candidates = ctx
        .candidates
        .iter()
        .map(|&i| value_bound(i, ctx.k, ctx.d, &neighbors, ctx.duals, ctx.w, inst))
        .collect::<Result<Vec<_>>>()?;
    if ctx.options.preselect_positive {
        candidates.retain(|c| c.vbar > 0.0);
    }
    candidates.sort_by(|a, b| b.vbar.total_cmp(&a.vbar).then(a.patient.cmp(&b.patient)));
    let threshold = ctx.duals.u[ctx.d.0] + ctx.options.eps;
    let mut search = Search {
        ctx,
        mandatory,
        candidates,
        threshold,
        fixed_in: Vec::new(),
        fixed_out: Vec::new(),
        stats,
    };
    search.node(0)
}

struct Search<'a, 'b> {
    ctx: &'a DayPricing<'b>,
    mandatory: Vec<PatientValueBound>,
    candidates: Vec<PatientValueBound>,
    threshold: f64,
    fixed_in: Vec<PatientId>,
    fixed_out: Vec<PatientId>,
    stats: &'a mut PricingStats,
}

impl Search<'_, '_> {
    fn route(&mut self, extra: &[PatientId]) -> Result<Option<Arc<RoutedDay>>> {
        let mut set: Vec<PatientId> = self.ctx.mandatory.to_vec();
        set.extend_from_slice(extra);
        if set.len() > self.ctx.inst.max_per_day() {
            return Ok(None);
        }
        self.stats.routings += 1;
        self.ctx
            .cache
            .get_or_solve(self.ctx.k, self.ctx.d, &set, self.ctx.inst)
    }

    /// `next` indexes the first candidate not yet fixed; candidates are
    /// fixed in descending `vbar` order.
    fn node(&mut self, next: usize) -> Result<Option<Arc<RoutedDay>>> {
        self.stats.nodes += 1;
        let ctx = self.ctx;
        let outcome = knapsack_bound(
            &self.mandatory,
            &self.candidates,
            &self.fixed_in,
            &self.fixed_out,
            ctx.k,
            ctx.d,
            ctx.inst,
        );
        let KnapsackOutcome::Bound(bound, selection) = outcome else {
            return Ok(None);
        };
        if bound <= self.threshold {
            return Ok(None);
        }
        if let Some(route) = self.route(&selection)? {
            if ctx.duals.pricing_value(&route, ctx.w, ctx.inst) > self.threshold {
                return Ok(Some(route));
            }
        }
        if ctx.options.prune_infeasible_forced && selection != self.fixed_in {
            let forced = self.fixed_in.clone();
            if self.route(&forced)?.is_none() {
                return Ok(None);
            }
        }
        if next >= self.candidates.len() {
            return Ok(None);
        }
        let branch = self.candidates[next].patient;
        self.fixed_in.push(branch);
        let found = self.node(next + 1)?;
        self.fixed_in.pop();
        if found.is_some() {
            return Ok(found);
        }
        self.fixed_out.push(branch);
        let found = self.node(next + 1)?;
        self.fixed_out.pop();
        Ok(found)
    }
}
