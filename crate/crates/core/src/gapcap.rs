//! Generalized assignment with hard machine capacities.
//!
//! The LP relaxation is solved at a guessed makespan `T` and its basic
//! solution is rounded by the capacitated walk: job rows stay equalities,
//! machine load rows are pinned at the fractional load, capacity rows are
//! never violated, and per-machine overload stays below the largest
//! fractionally assigned processing time. Cost is handled either in
//! expectation (random branches) or exactly, by always taking the branch that
//! does not raise the cost functional.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpsolve::{self, LinearProgram, LpStatus, Sense};
use crate::polytope::{Constraint, Point, Relation, Tag, DEFAULT_TOL};
use crate::walk::{CapWalk, Edge};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapInstance {
    pub machines: usize,
    pub jobs: usize,
    /// `p[i][j]`: processing time of job `j` on machine `i`.
    pub p: Vec<Vec<f64>>,
    /// `c[i][j]`: cost of running job `j` on machine `i`.
    pub c: Vec<Vec<f64>>,
    /// Maximum number of jobs per machine.
    pub b: Vec<u32>,
    pub cost_budget: f64,
    pub makespan_target: Option<f64>,
}

pub(crate) fn check_matrix(name: &str, a: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if a.len() != rows || a.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput(format!("{name} must be {rows}x{cols}")));
    }
    for (i, r) in a.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!("{name}[{i}][{j}] = {v} must be finite and non-negative")));
            }
        }
    }
    Ok(())
}

impl GapInstance {
    pub fn new(p: Vec<Vec<f64>>, c: Vec<Vec<f64>>, b: Vec<u32>, cost_budget: f64) -> Result<Self> {
        let inst = Self {
            machines: p.len(),
            jobs: p.first().map_or(0, Vec::len),
            p,
            c,
            b,
            cost_budget,
            makespan_target: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_target(mut self, t: f64) -> Self {
        self.makespan_target = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_matrix("p", &self.p, self.machines, self.jobs)?;
        check_matrix("c", &self.c, self.machines, self.jobs)?;
        if self.b.len() != self.machines {
            return Err(Error::InvalidInput(format!("b needs {} entries", self.machines)));
        }
        if !self.cost_budget.is_finite() || self.cost_budget < 0.0 {
            return Err(Error::InvalidInput(format!("cost budget {} must be non-negative", self.cost_budget)));
        }
        if let Some(t) = self.makespan_target {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidInput(format!("makespan target {t} must be non-negative")));
            }
        }
        Ok(())
    }

    fn p_integral(&self) -> bool {
        self.p.iter().flatten().all(|v| v.fract() == 0.0)
    }

    /// Sum over jobs of the largest processing time; every schedule fits.
    pub fn makespan_ceiling(&self) -> f64 {
        (0..self.jobs)
            .map(|j| (0..self.machines).map(|i| self.p[i][j]).fold(0.0, f64::max))
            .sum()
    }

    /// Loads, costs and counts of a complete assignment `job -> machine`.
    pub fn evaluate(&self, assign: &[usize]) -> (Vec<f64>, f64, Vec<usize>) {
        let mut loads = vec![0.0; self.machines];
        let mut counts = vec![0; self.machines];
        let mut cost = 0.0;
        for (j, &i) in assign.iter().enumerate() {
            loads[i] += self.p[i][j];
            counts[i] += 1;
            cost += self.c[i][j];
        }
        (loads, cost, counts)
    }
}

/// The LP relaxation at one makespan guess. Variable `k` is the pair
/// `edges[k] = (machine, job)`; pairs with `p > T` have no variable.
#[derive(Clone, Debug)]
pub struct CapLp {
    pub lp: LinearProgram,
    pub edges: Vec<(usize, usize)>,
    pub t: f64,
}

impl CapLp {
    /// Reads a dense `machines x jobs` fractional matrix into LP variables;
    /// mass on pruned pairs is rejected.
    pub fn point_from_matrix(&self, x: &[Vec<f64>]) -> Result<Point> {
        let mut pt = vec![0.0; self.edges.len()];
        let mut covered = vec![vec![false; x.first().map_or(0, Vec::len)]; x.len()];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            pt[k] = *x
                .get(i)
                .and_then(|r| r.get(j))
                .ok_or_else(|| Error::InvalidInput(format!("fractional matrix lacks entry ({i},{j})")))?;
            covered[i][j] = true;
        }
        for (i, r) in x.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if !covered[i][j] && v != 0.0 {
                    return Err(Error::InfeasiblePoint(format!("x[{i}][{j}] = {v} on a pair with p > T")));
                }
            }
        }
        Ok(Point(pt))
    }

    /// Dense `machines x jobs` view of an LP point.
    pub fn to_matrix(&self, x: &[f64], machines: usize, jobs: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; jobs]; machines];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            out[i][j] = x[k];
        }
        out
    }

    /// `sum_j p_ij x_ij` per machine.
    pub fn fractional_loads(&self, inst: &GapInstance, x: &[f64]) -> Vec<f64> {
        let mut loads = vec![0.0; inst.machines];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            loads[i] += inst.p[i][j] * x[k];
        }
        loads
    }

    pub fn cost(&self, inst: &GapInstance, x: &[f64]) -> f64 {
        self.edges.iter().enumerate().map(|(k, &(i, j))| inst.c[i][j] * x[k]).sum()
    }
}

/// Feasibility LP with rows `Cost`, `Assign`, `Load <= T` and
/// `Capacity <= b_i`, zero objective.
pub fn build_lp_cap(inst: &GapInstance, t: f64) -> Result<CapLp> {
    inst.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!("makespan guess {t} must be non-negative")));
    }
    let mut edges = Vec::new();
    for i in 0..inst.machines {
        for j in 0..inst.jobs {
            if inst.p[i][j] <= t {
                edges.push((i, j));
            }
        }
    }
    let mut lp = LinearProgram::new(edges.len(), Sense::Minimize);
    for k in 0..edges.len() {
        lp.set_bounds(k, 0.0, 1.0);
    }
    let all = |f: &dyn Fn(usize, usize) -> Option<f64>| -> Vec<(usize, f64)> {
        edges
            .iter()
            .enumerate()
            .filter_map(|(k, &(i, j))| f(i, j).map(|a| (k, a)))
            .collect()
    };
    lp.add(Constraint::le(all(&|i, j| Some(inst.c[i][j])), inst.cost_budget, Tag::Cost));
    for jj in 0..inst.jobs {
        lp.add(Constraint::eq(all(&|_, j| (j == jj).then_some(1.0)), 1.0, Tag::Assign));
    }
    for ii in 0..inst.machines {
        lp.add(Constraint::le(all(&|i, j| (i == ii).then_some(inst.p[i][j])), t, Tag::Load));
        lp.add(Constraint::le(all(&|i, _| (i == ii).then_some(1.0)), inst.b[ii] as f64, Tag::Capacity));
    }
    Ok(CapLp { lp, edges, t })
}

/// Solves the relaxation at `t`; `None` when it is infeasible.
pub fn solve_lp_cap(inst: &GapInstance, t: f64) -> Result<Option<(CapLp, Point)>> {
    let cap = build_lp_cap(inst, t)?;
    let sol = lpsolve::solve(&cap.lp)?;
    Ok(match sol.status {
        LpStatus::Optimal => Some((cap, sol.values)),
        _ => None,
    })
}

/// Smallest `t` in `[0, hi]` accepted by the monotone predicate `feasible`:
/// over the integers when `integral`, otherwise by bisection to `precision`.
/// `None` when even `hi` is rejected.
pub(crate) fn search_threshold(
    hi: f64,
    integral: bool,
    precision: f64,
    mut feasible: impl FnMut(f64) -> Result<bool>,
) -> Result<Option<f64>> {
    if !feasible(hi)? {
        return Ok(None);
    }
    if feasible(0.0)? {
        return Ok(Some(0.0));
    }
    if integral {
        // infeasible at lo, feasible at hi
        let (mut lo, mut hi) = (0u64, hi.ceil() as u64);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if feasible(mid as f64)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(Some(hi as f64));
    }
    if !(precision > 0.0) {
        return Err(Error::InvalidInput(format!("precision {precision} must be positive")));
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Smallest makespan guess with a feasible relaxation: exact over the
/// integers when every `p` is integral, otherwise bisection to `precision`
/// (default `1e-6 * sum p`).
pub fn min_feasible_t(inst: &GapInstance, precision: Option<f64>) -> Result<f64> {
    inst.validate()?;
    let hi = inst.makespan_ceiling();
    let total: f64 = inst.p.iter().flatten().sum();
    let prec = precision.unwrap_or(1e-6 * total.max(1.0));
    search_threshold(hi, inst.p_integral(), prec, |t| Ok(solve_lp_cap(inst, t)?.is_some()))?.ok_or_else(|| {
        Error::Infeasible(format!(
            "relaxation infeasible even at T = {hi}; capacities or cost budget too small"
        ))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    /// Machine of each job.
    pub assign: Vec<usize>,
    pub makespan: f64,
    pub cost: f64,
    pub loads: Vec<f64>,
    pub counts: Vec<usize>,
    /// Randomized moves performed.
    pub iterations: usize,
    /// Rows plus variables of the initial walk system.
    pub iteration_bound: usize,
}

fn walk_edges(inst: &GapInstance, cap: &CapLp) -> Vec<Edge> {
    cap.edges
        .iter()
        .map(|&(i, j)| Edge { machine: i, job: j, weight: inst.p[i][j] })
        .collect()
}

fn round_with(
    inst: &GapInstance,
    cap: &CapLp,
    x: &[f64],
    pick: impl FnMut(&crate::polytope::MoveBranches) -> bool,
) -> Result<Schedule> {
    let viol = cap.lp.max_violation(x);
    if x.len() != cap.edges.len() || viol > 1e-6 {
        return Err(Error::InfeasiblePoint(format!(
            "fractional assignment violates the relaxation at T = {} by {viol}",
            cap.t
        )));
    }
    let edges = walk_edges(inst, cap);
    let walk = CapWalk {
        edges: &edges,
        machines: inst.machines,
        jobs: inst.jobs,
        load_rhs: cap.fractional_loads(inst, x),
        load_relation: Relation::Le,
        caps: inst.b.iter().map(|&b| Some(b as f64)).collect(),
        sink: None,
        tol: DEFAULT_TOL,
    };
    let out = walk.run(x, pick)?;
    let mut assign = vec![usize::MAX; inst.jobs];
    for (k, &(i, j)) in cap.edges.iter().enumerate() {
        if out.x[k] == 1.0 {
            assign[j] = i;
        }
    }
    if let Some(j) = assign.iter().position(|&i| i == usize::MAX) {
        return Err(Error::InvariantViolation(format!("job {j} left unassigned by the walk")));
    }
    let (loads, cost, counts) = inst.evaluate(&assign);
    if let Some(i) = (0..inst.machines).find(|&i| counts[i] > inst.b[i] as usize) {
        return Err(Error::InvariantViolation(format!(
            "machine {i} holds {} jobs, capacity {}",
            counts[i], inst.b[i]
        )));
    }
    Ok(Schedule {
        makespan: loads.iter().copied().fold(0.0, f64::max),
        assign,
        cost,
        loads,
        counts,
        iterations: out.iterations,
        iteration_bound: out.bound,
    })
}

/// Randomized rounding of a relaxation point; every edge keeps its
/// expectation.
pub fn sched_cap_round<R: Rng + ?Sized>(inst: &GapInstance, cap: &CapLp, x: &[f64], rng: &mut R) -> Result<Schedule> {
    round_with(inst, cap, x, |b| rng.gen::<f64>() < b.prob_plus())
}

/// Deterministic rounding that never lets the cost functional increase.
pub fn derandomize_cost(inst: &GapInstance, cap: &CapLp, x: &[f64]) -> Result<Schedule> {
    round_with(inst, cap, x, |b| cap.cost(inst, &b.plus) <= cap.cost(inst, &b.minus))
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSolution {
    /// Makespan guess the relaxation was solved at.
    pub t: f64,
    pub lp_cost: f64,
    pub fractional: Vec<Vec<f64>>,
    pub schedule: Schedule,
}

/// Solves the relaxation at the instance's target (or the smallest feasible
/// guess) and rounds it deterministically.
pub fn solve_gap_cap(inst: &GapInstance, precision: Option<f64>) -> Result<GapSolution> {
    let t = match inst.makespan_target {
        Some(t) => t,
        None => min_feasible_t(inst, precision)?,
    };
    let (cap, x) = solve_lp_cap(inst, t)?
        .ok_or_else(|| Error::Infeasible(format!("relaxation infeasible at T = {t}")))?;
    let schedule = derandomize_cost(inst, &cap, &x)?;
    Ok(GapSolution {
        t,
        lp_cost: cap.cost(inst, &x),
        fractional: cap.to_matrix(&x, inst.machines, inst.jobs),
        schedule,
    })
}
