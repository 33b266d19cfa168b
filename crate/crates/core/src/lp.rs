//! Dense two-phase revised simplex for small maximization LPs.
//!
//! The basis inverse is kept explicitly and refactored periodically. Entering
//! and leaving variables follow Bland's rule, which keeps the method finite
//! and deterministic.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarBound {
    /// `[0, inf)`
    NonNegative,
    /// `[0, 1]`
    Unit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coefs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `max c·x` subject to the rows and variable bounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            rows: Vec::new(),
            bounds: vec![VarBound::NonNegative; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coefs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            coefs,
            relation,
            rhs,
        });
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n || self.rows.iter().any(|r| r.coefs.len() != n) {
            return Err(Error::NumericalFailure(
                "row and objective dimensions disagree".into(),
            ));
        }
        let finite = self.objective.iter().chain(
            self.rows
                .iter()
                .flat_map(|r| r.coefs.iter().chain(std::iter::once(&r.rhs))),
        );
        if finite.clone().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Plain-text listing for debugging.
    pub fn to_lp_string(&self, var_names: &[String], row_names: &[String]) -> String {
        use std::fmt::Write;
        let name = |j: usize| var_names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
        let term_list = |coefs: &[f64]| {
            let mut s = String::new();
            for (j, &c) in coefs.iter().enumerate() {
                if c != 0.0 {
                    let _ = write!(
                        s,
                        " {} {} {}",
                        if c < 0.0 { "-" } else { "+" },
                        c.abs(),
                        name(j)
                    );
                }
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let mut out = String::from("maximize\n obj:");
        out.push_str(&term_list(&self.objective));
        out.push_str("\nsubject to\n");
        for (i, r) in self.rows.iter().enumerate() {
            let rel = match r.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let rn = row_names.get(i).cloned().unwrap_or_else(|| format!("r{i}"));
            let _ = writeln!(out, " {rn}:{} {rel} {}", term_list(&r.coefs), r.rhs);
        }
        out.push_str("bounds\n");
        for (j, b) in self.bounds.iter().enumerate() {
            let hi = match b {
                VarBound::NonNegative => "inf".to_string(),
                VarBound::Unit => "1".to_string(),
            };
            let _ = writeln!(out, " 0 <= {} <= {hi}", name(j));
        }
        out.push_str("end\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// One dual per row: `>= 0` for `<=` rows, `<= 0` for `>=` rows, free for equalities.
    pub duals: Vec<f64>,
    /// Duals of the `x <= 1` bounds (zero for unbounded variables), all `>= 0`.
    pub bound_duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;

/// Standard form `A x = b`, `x >= 0`, `b >= 0`, with an identity start basis
/// made of slacks and artificials.
struct Tableau {
    m: usize,
    n_struct: usize,
    /// Column-major constraint matrix.
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    first_artificial: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

enum Phase {
    One,
    Two,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Tableau {
    fn binv_row(&self, r: usize) -> &[f64] {
        &self.binv[r * self.m..(r + 1) * self.m]
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (k, &a) in col.iter().enumerate() {
            if a != 0.0 {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.binv[i * m + k] * a;
                }
            }
        }
        out
    }

    fn cost(&self, phase: &Phase, c: &[f64], j: usize) -> f64 {
        match phase {
            Phase::One => {
                if j >= self.first_artificial {
                    -1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if j < self.n_struct {
                    c[j]
                } else {
                    0.0
                }
            }
        }
    }

    fn duals(&self, phase: &Phase, c: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = self.cost(phase, c, j);
            if cb != 0.0 {
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * self.binv[r * m + k];
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        // Gauss-Jordan on [B | I] with partial pivoting
        let mut a = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, &v) in self.cols[j].iter().enumerate() {
                a[i * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::NumericalFailure("singular basis".into()));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        let b = self.b.clone();
        self.xb = self.ftran(&b);
        for x in &mut self.xb {
            if *x < 0.0 && *x > -FEAS_TOL {
                *x = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let pr = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        self.xb[r] /= pr;
        for (i, &f) in alpha.iter().enumerate() {
            if i != r && f != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.xb[i] -= f * self.xb[r];
                if self.xb[i] < 0.0 && self.xb[i] > -FEAS_TOL {
                    self.xb[i] = 0.0;
                }
            }
        }
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn step(&mut self, phase: &Phase, c: &[f64]) -> Result<Step> {
        let y = self.duals(phase, c);
        let allow_art = matches!(phase, Phase::One);
        let mut entering = None;
        for j in 0..self.cols.len() {
            if self.in_basis[j] || (!allow_art && j >= self.first_artificial) {
                continue;
            }
            let col = &self.cols[j];
            let mut d = self.cost(phase, c, j);
            for (k, &a) in col.iter().enumerate() {
                if a != 0.0 {
                    d -= y[k] * a;
                }
            }
            if d > COST_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return Ok(Step::Optimal);
        };
        let alpha = self.ftran(&self.cols[j]);
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            if a > PIVOT_TOL {
                let t = self.xb[i].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        t < ratio - 1e-12 || (t <= ratio + 1e-12 && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    ratio = t;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Ok(Step::Unbounded);
        };
        self.pivot(r, j, &alpha);
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(Step::Pivoted)
    }

    /// Runs the simplex for one phase. Returns false when unbounded.
    fn optimize(&mut self, phase: &Phase, c: &[f64]) -> Result<bool> {
        let limit = 50_000 + 100 * (self.m + self.cols.len());
        loop {
            if self.iterations > limit {
                return Err(Error::NumericalFailure("iteration limit".into()));
            }
            match self.step(phase, c)? {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Pivoted => {}
            }
        }
    }
}

/// Solves `lp` to optimality.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.check()?;
    let n = lp.n_vars();
    // bound rows come after the user rows
    let unit: Vec<usize> = (0..n).filter(|&j| lp.bounds[j] == VarBound::Unit).collect();
    let m = lp.rows.len() + unit.len();
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .rows
        .iter()
        .map(|r| (r.coefs.clone(), r.relation, r.rhs))
        .collect();
    for &j in &unit {
        let mut coefs = vec![0.0; n];
        coefs[j] = 1.0;
        rows.push((coefs, Relation::Le, 1.0));
    }
    let mut flipped = vec![false; m];
    for (i, (coefs, rel, rhs)) in rows.iter_mut().enumerate() {
        if *rhs < 0.0 {
            flipped[i] = true;
            for c in coefs.iter_mut() {
                *c = -*c;
            }
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| rows.iter().map(|r| r.0[j]).collect())
        .collect();
    let mut basis = vec![usize::MAX; m];
    // slacks and surpluses
    for (i, (_, rel, _)) in rows.iter().enumerate() {
        let sign = match rel {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => continue,
        };
        let mut col = vec![0.0; m];
        col[i] = sign;
        if sign > 0.0 {
            basis[i] = cols.len();
        }
        cols.push(col);
    }
    let first_artificial = cols.len();
    for i in 0..m {
        if basis[i] == usize::MAX {
            let mut col = vec![0.0; m];
            col[i] = 1.0;
            basis[i] = cols.len();
            cols.push(col);
        }
    }
    let mut in_basis = vec![false; cols.len()];
    for &j in &basis {
        in_basis[j] = true;
    }
    let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut t = Tableau {
        m,
        n_struct: n,
        cols,
        xb: b.clone(),
        b,
        first_artificial,
        basis,
        in_basis,
        binv,
        iterations: 0,
        since_refactor: 0,
    };

    let c = &lp.objective;
    if t.first_artificial < t.cols.len() {
        t.optimize(&Phase::One, c)?;
        t.refactor()?;
        let infeas: f64 = t
            .basis
            .iter()
            .zip(&t.xb)
            .filter(|(&j, _)| j >= t.first_artificial)
            .map(|(_, &x)| x)
            .sum();
        let scale = 1.0 + t.b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if infeas > 1e-7 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        drive_out_artificials(&mut t)?;
    }
    if !t.optimize(&Phase::Two, c)? {
        return Ok(LpOutcome::Unbounded);
    }
    t.refactor()?;
    // a last pricing pass after refactoring catches drift
    if !t.optimize(&Phase::Two, c)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[r].max(0.0);
        }
    }
    let y = t.duals(&Phase::Two, c);
    let signed: Vec<f64> = y
        .iter()
        .zip(&flipped)
        .map(|(&v, &f)| if f { -v } else { v })
        .collect();
    let duals = signed[..lp.rows.len()].to_vec();
    let mut bound_duals = vec![0.0; n];
    for (k, &j) in unit.iter().enumerate() {
        bound_duals[j] = signed[lp.rows.len() + k];
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        duals,
        bound_duals,
        objective,
        iterations: t.iterations,
    }))
}

fn drive_out_artificials(t: &mut Tableau) -> Result<()> {
    for r in 0..t.m {
        if t.basis[r] < t.first_artificial {
            continue;
        }
        let row: Vec<f64> = t.binv_row(r).to_vec();
        let mut choice = None;
        for j in 0..t.first_artificial {
            if t.in_basis[j] {
                continue;
            }
            let v: f64 = t.cols[j].iter().zip(&row).map(|(a, b)| a * b).sum();
            if v.abs() > 1e-7 {
                choice = Some(j);
                break;
            }
        }
        // otherwise the row is redundant and the artificial stays at zero
        if let Some(j) = choice {
            let alpha = t.ftran(&t.cols[j]);
            t.pivot(r, j, &alpha);
        }
    }
    t.refactor()
}

/// Optimality residuals of a solution, all absolute.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    /// `|primal objective - dual objective| / (1 + |objective|)`
    pub gap: f64,
    pub complementary: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.gap)
            .max(self.complementary)
    }
}

pub fn residuals(lp: &LinearProgram, sol: &LpSolution) -> Residuals {
    let n = lp.n_vars();
    let mut res = Residuals::default();
    for (j, &x) in sol.x.iter().enumerate() {
        res.primal = res.primal.max(-x);
        if lp.bounds[j] == VarBound::Unit {
            res.primal = res.primal.max(x - 1.0);
        }
    }
    let mut dual_obj = 0.0;
    for (row, &y) in lp.rows.iter().zip(&sol.duals) {
        let lhs: f64 = row.coefs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        let slack = row.rhs - lhs;
        match row.relation {
            Relation::Le => {
                res.primal = res.primal.max(-slack);
                res.dual = res.dual.max(-y);
            }
            Relation::Ge => {
                res.primal = res.primal.max(slack);
                res.dual = res.dual.max(y);
            }
            Relation::Eq => res.primal = res.primal.max(slack.abs()),
        }
        res.complementary = res.complementary.max((y * slack).abs());
        dual_obj += y * row.rhs;
    }
    for j in 0..n {
        let ub = sol.bound_duals[j];
        res.dual = res.dual.max(-ub);
        dual_obj += ub;
        let mut reduced = lp.objective[j] - ub;
        for (row, &y) in lp.rows.iter().zip(&sol.duals) {
            reduced -= y * row.coefs[j];
        }
        res.dual = res.dual.max(reduced);
        res.complementary = res.complementary.max((reduced * sol.x[j]).abs());
        if lp.bounds[j] == VarBound::Unit {
            res.complementary = res.complementary.max((ub * (1.0 - sol.x[j])).abs());
        }
    }
    res.gap = (sol.objective - dual_obj).abs() / (1.0 + sol.objective.abs());
    res
}
