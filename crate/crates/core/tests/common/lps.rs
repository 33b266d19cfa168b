use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhhc_core::lp::{LinearProgram, LpSolution, Relation, VarBound};

/// Random LP that is feasible by construction (a known point satisfies every
/// row) and bounded (a cap on the sum of the variables). Small integer data
/// makes degenerate vertices common.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=8);
    let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(-5..=10) as f64).collect());
    for b in lp.bounds.iter_mut() {
        if rng.gen_bool(0.3) {
            *b = VarBound::Unit;
        }
    }
    let point: Vec<f64> = lp
        .bounds
        .iter()
        .map(|b| {
            if *b == VarBound::Unit {
                rng.gen_range(0..=1) as f64
            } else {
                rng.gen_range(0..=3) as f64
            }
        })
        .collect();
    for _ in 0..m {
        let coefs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(-3..=4) as f64
                }
            })
            .collect();
        let at: f64 = coefs.iter().zip(&point).map(|(a, x)| a * x).sum();
        match rng.gen_range(0..3) {
            0 => lp.add_row(coefs, Relation::Le, at + rng.gen_range(0..=3) as f64),
            1 => lp.add_row(coefs, Relation::Ge, at - rng.gen_range(0..=3) as f64),
            _ => lp.add_row(coefs, Relation::Eq, at),
        }
    }
    let cap = point.iter().sum::<f64>() + rng.gen_range(0..=5) as f64;
    lp.add_row(vec![1.0; n], Relation::Le, cap);
    lp
}

/// Largest violation of primal feasibility, dual feasibility, strong duality
/// and complementary slackness, computed from scratch.
pub fn kkt_error(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let n = lp.n_vars();
    let mut err: f64 = 0.0;
    for j in 0..n {
        err = err.max(-sol.x[j]);
        if lp.bounds[j] == VarBound::Unit {
            err = err.max(sol.x[j] - 1.0);
            err = err.max((sol.bound_duals[j] * (1.0 - sol.x[j])).abs());
        } else {
            err = err.max(sol.bound_duals[j].abs());
        }
        err = err.max(-sol.bound_duals[j]);
    }
    let mut dual_obj: f64 = sol.bound_duals.iter().sum();
    for (row, &y) in lp.rows.iter().zip(&sol.duals) {
        let lhs: f64 = row.coefs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        let slack = row.rhs - lhs;
        err = err.max(match row.relation {
            Relation::Le => (-slack).max(-y),
            Relation::Ge => slack.max(y),
            Relation::Eq => slack.abs(),
        });
        err = err.max((y * slack).abs());
        dual_obj += y * row.rhs;
    }
    for j in 0..n {
        let reduced = lp.objective[j]
            - sol.bound_duals[j]
            - lp.rows
                .iter()
                .zip(&sol.duals)
                .map(|(r, y)| y * r.coefs[j])
                .sum::<f64>();
        err = err.max(reduced);
        err = err.max((reduced * sol.x[j]).abs());
    }
    let primal_obj: f64 = lp.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
    err = err.max((primal_obj - sol.objective).abs());
    err.max((primal_obj - dual_obj).abs())
}
