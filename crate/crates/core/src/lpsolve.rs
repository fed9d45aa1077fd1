//! Dense two-phase simplex over a full tableau.
//!
//! Sized for desk-scale relaxations (a few hundred columns). Optimal answers
//! are basic feasible solutions, which the rounding algorithms rely on when
//! they start walking from a vertex. Pricing is Dantzig's largest coefficient
//! rule until the pivot count passes three times the row count, after which
//! Bland's smallest-index rule takes over so degenerate LPs cannot cycle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polytope::{Constraint, Point, Relation};

const PIVOT_EPS: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// Per-variable `[lo, hi]`; `hi` may be `f64::INFINITY`.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Program with zero objective and every variable in `[0, ∞)`.
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            sense,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn set_bounds(&mut self, v: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[v] = (lo, hi);
        self
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| (-c.slack(x)).max(0.0));
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars || self.bounds.len() != self.num_vars {
            return Err(Error::InvalidInput("objective/bounds length mismatch".into()));
        }
        if let Some(v) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("objective coefficient {v} is not finite")));
        }
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidInput(format!("variable {v} has bounds [{lo}, {hi}]")));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidInput(format!("{:?} row has non-finite rhs", c.tag)));
            }
            for &(v, a) in &c.coeffs {
                if v >= self.num_vars || !a.is_finite() {
                    return Err(Error::InvalidInput(format!("{:?} row has bad entry on var {v}", c.tag)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Point,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            values: Point::default(),
            objective_value: f64::NAN,
        }
    }
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = 1.0 / self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v *= inv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Minimises `cost·x` over the columns flagged in `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], max_pivots: usize) -> Result<Outcome> {
        let bland_after = 3 * self.t.len().max(1);
        let mut local = 0usize;
        loop {
            let mut reduced = cost.to_vec();
            for (r, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb != 0.0 {
                    for (j, red) in reduced.iter_mut().enumerate() {
                        *red -= cb * self.t[r][j];
                    }
                }
            }
            let bland = local >= bland_after;
            let mut entering = None;
            let mut best = -PIVOT_EPS;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                if reduced[j] < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = reduced[j];
                }
            }
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][c];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12
                            || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, c);
            local += 1;
            if self.pivots > max_pivots {
                return Err(Error::SolverFailure(format!("no convergence after {max_pivots} pivots")));
            }
        }
    }
}

/// Solves `lp`, returning a basic optimal solution or the infeasible /
/// unbounded status.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars;

    // Shift every variable to start at zero; fixed variables become constants.
    let mut col_of = vec![None; n];
    let mut free_vars = Vec::new();
    for v in 0..n {
        let (lo, hi) = lp.bounds[v];
        if hi - lo > 1e-12 {
            col_of[v] = Some(free_vars.len());
            free_vars.push(v);
        }
    }
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();

    // Rows as (dense coeffs over free vars, relation, rhs).
    let nf = free_vars.len();
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; nf];
        let mut rhs = c.rhs;
        for &(v, coef) in &c.coeffs {
            rhs -= coef * lo[v];
            if let Some(k) = col_of[v] {
                a[k] += coef;
            }
        }
        if a.iter().all(|&x| x == 0.0) {
            let ok = match c.relation {
                Relation::Le => rhs >= -FEAS_TOL,
                Relation::Ge => rhs <= FEAS_TOL,
                Relation::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return Ok(LpSolution::without_point(LpStatus::Infeasible));
            }
            continue;
        }
        rows.push((a, c.relation, rhs));
    }
    for (k, &v) in free_vars.iter().enumerate() {
        let (l, h) = lp.bounds[v];
        if h.is_finite() {
            let mut a = vec![0.0; nf];
            a[k] = 1.0;
            rows.push((a, Relation::Le, h - l));
        }
    }
    for (a, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            a.iter_mut().for_each(|x| *x = -*x);
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = nf + n_slack + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut is_art = vec![false; cols];
    let (mut s, mut art) = (nf, nf + n_slack);
    for (r, (a, rel, rhs)) in rows.iter().enumerate() {
        t[r][..nf].copy_from_slice(a);
        t[r][cols] = *rhs;
        match rel {
            Relation::Le => {
                t[r][s] = 1.0;
                basis[r] = s;
                s += 1;
            }
            Relation::Ge => {
                t[r][s] = -1.0;
                s += 1;
                t[r][art] = 1.0;
                is_art[art] = true;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                t[r][art] = 1.0;
                is_art[art] = true;
                basis[r] = art;
                art += 1;
            }
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        cols,
        pivots: 0,
    };
    let max_pivots = 200 * (m + cols) + 1000;

    if n_art > 0 {
        let cost: Vec<f64> = is_art.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        tab.optimize(&cost, &vec![true; cols], max_pivots)?;
        let infeas: f64 = (0..m).filter(|&r| is_art[tab.basis[r]]).map(|r| tab.rhs(r)).sum();
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.t.len() {
            if is_art[tab.basis[r]] {
                let col = (0..cols).find(|&j| !is_art[j] && tab.t[r][j].abs() > PIVOT_EPS);
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    for (k, &v) in free_vars.iter().enumerate() {
        cost[k] = match lp.sense {
            Sense::Minimize => lp.objective[v],
            Sense::Maximize => -lp.objective[v],
        };
    }
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    if let Outcome::Unbounded = tab.optimize(&cost, &allowed, max_pivots)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let mut x = lo.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nf {
            x[free_vars[b]] += tab.rhs(r);
        }
    }
    for (v, xv) in x.iter_mut().enumerate() {
        let (l, h) = lp.bounds[v];
        if (*xv - l).abs() <= PIVOT_EPS {
            *xv = l;
        } else if h.is_finite() && (*xv - h).abs() <= PIVOT_EPS {
            *xv = h;
        }
    }
    let viol = lp.max_violation(&x);
    if viol > FEAS_TOL * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(Error::SolverFailure(format!("solution violates constraints by {viol}")));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_value(&x),
        values: Point(x),
    })
}
