//! Fixtures shared by the benchmarks.

use rhhc_core::lp::{LinearProgram, Relation, VarBound};
use rhhc_core::{
    generate, CaregiverId, DayId, GeneratorConfig, Instance, PatientId, TwLevel, UncertaintyLevel,
};

pub fn week(tw: TwLevel, uncertainty: UncertaintyLevel, seed: u64) -> Instance {
    generate(&GeneratorConfig {
        tw,
        uncertainty,
        seed,
        ..GeneratorConfig::default()
    })
}

/// Small enough for a full branch-and-price run per iteration.
pub fn small_week(uncertainty: UncertaintyLevel, seed: u64) -> Instance {
    generate(&GeneratorConfig {
        uncertainty,
        seed,
        n_existing: 10,
        n_new_per_day: 2,
        n_caregivers: 2,
        n_days: 3,
        ..GeneratorConfig::default()
    })
}

/// The caregiver-day with the most existing visits.
pub fn busiest_day(inst: &Instance) -> (CaregiverId, DayId, Vec<PatientId>) {
    let mut best = (CaregiverId(0), DayId(0), Vec::new());
    for k in 0..inst.n_caregivers() {
        for d in 0..inst.n_days() {
            let (k, d) = (CaregiverId(k), DayId(d));
            let route = inst.existing_on(k, d);
            if route.len() > best.2.len() {
                best = (k, d, route.to_vec());
            }
        }
    }
    best
}

/// Assignment relaxation of an `n` by `n` grid with deterministic profits.
pub fn assignment_lp(n: usize) -> LinearProgram {
    let profit = |i: usize, j: usize| ((i * 7 + j * 13) % 17) as f64 + 1.0;
    let mut lp = LinearProgram::new((0..n * n).map(|v| profit(v / n, v % n)).collect());
    lp.bounds = vec![VarBound::Unit; n * n];
    for i in 0..n {
        let row = (0..n * n)
            .map(|v| if v / n == i { 1.0 } else { 0.0 })
            .collect();
        lp.add_row(row, Relation::Le, 1.0);
        let col = (0..n * n)
            .map(|v| if v % n == i { 1.0 } else { 0.0 })
            .collect();
        lp.add_row(col, Relation::Le, 1.0);
    }
    lp
}
