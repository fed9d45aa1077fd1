//! Generalized assignment with outliers: jobs carry profits, only a subset
//! needs to be scheduled, and the scheduled profit must reach a hard floor.
//!
//! Expensive machine/job pairs (cost above `ε²·C`) are fixed by enumeration,
//! the remaining relaxation is solved, and its basic solution is walked to an
//! integral point. During the walk every non-singleton job keeps its
//! fractional coverage `y_j`, while singleton jobs (one floating edge) share a
//! single profit equality, so the scheduled profit never drops. When the walk
//! reaches a vertex, first the coverage rows of under-covered jobs and then
//! the load rows of nearly full machines are released; if the point is still
//! a vertex the floating subgraph is small and is finished combinatorially.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gapcap::{check_matrix, search_threshold};
use crate::lpsolve::{self, LinearProgram, LpStatus, Sense};
use crate::polytope::{is_vertex, rand_move_branches, Constraint, MoveBranches, Point, Polytope, Tag, DEFAULT_TOL};

/// Default cap on the number of enumerated guesses.
pub const DEFAULT_GUESS_BUDGET: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierInstance {
    pub machines: usize,
    pub jobs: usize,
    pub p: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub profits: Vec<f64>,
    pub cost_budget: f64,
    pub profit_floor: f64,
    pub epsilon: f64,
    pub makespan_target: Option<f64>,
}

impl OutlierInstance {
    pub fn new(
        p: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        profits: Vec<f64>,
        cost_budget: f64,
        profit_floor: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let inst = Self {
            machines: p.len(),
            jobs: p.first().map_or(0, Vec::len),
            p,
            c,
            profits,
            cost_budget,
            profit_floor,
            epsilon,
            makespan_target: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_matrix("p", &self.p, self.machines, self.jobs)?;
        check_matrix("c", &self.c, self.machines, self.jobs)?;
        if self.profits.len() != self.jobs {
            return Err(Error::InvalidInput(format!("profits needs {} entries", self.jobs)));
        }
        if self.profits.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("profits must be finite and non-negative".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon {} must lie in (0,1)", self.epsilon)));
        }
        for (name, v) in [("cost budget", self.cost_budget), ("profit floor", self.profit_floor)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} {v} must be non-negative")));
            }
        }
        let total: f64 = self.profits.iter().sum();
        if self.profit_floor > total {
            return Err(Error::Infeasible(format!(
                "profit floor {} exceeds total profit {total}",
                self.profit_floor
            )));
        }
        Ok(())
    }

    /// `ε²`, the relative cost above which a pair is guessed.
    pub fn epsilon_sq(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// `⌊1/ε²⌋`, read with a little slack so `ε = sqrt(1/2)` gives 2.
    pub fn max_guessed_ones(&self) -> usize {
        (1.0 / self.epsilon_sq() + 1e-9).floor() as usize
    }

    fn p_integral(&self) -> bool {
        self.p.iter().flatten().all(|v| v.fract() == 0.0)
    }
}

/// Fixed values for every expensive pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Guess {
    pub forced: BTreeMap<(usize, usize), bool>,
}

impl Guess {
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forced.iter().filter(|(_, &v)| v).map(|(&k, _)| k)
    }
}

/// Every 0/1 assignment of the expensive pairs with at most `⌊1/ε²⌋` ones on
/// distinct jobs, in order of increasing number of ones.
pub fn enumerate_guesses(inst: &OutlierInstance, budget: usize) -> Result<Vec<Guess>> {
    inst.validate()?;
    let threshold = inst.epsilon_sq() * inst.cost_budget;
    let mut expensive = Vec::new();
    for i in 0..inst.machines {
        for j in 0..inst.jobs {
            if inst.c[i][j] > threshold {
                expensive.push((i, j));
            }
        }
    }
    let max_ones = inst.max_guessed_ones();
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let over = |n: usize| {
        Error::BudgetExceeded(format!(
            "more than {n} guesses over {} expensive pairs; use a larger epsilon",
            expensive.len()
        ))
    };
    // Enumerate subsets by size so cheaper guesses come first.
    for size in 0..=max_ones.min(expensive.len()) {
        chosen.clear();
        subsets(&expensive, size, 0, &mut chosen, &mut |pick| {
            if out.len() >= budget {
                return Err(over(budget));
            }
            let mut forced: BTreeMap<(usize, usize), bool> = expensive.iter().map(|&e| (e, false)).collect();
            for &k in pick {
                forced.insert(expensive[k], true);
            }
            out.push(Guess { forced });
            Ok(())
        })?;
    }
    Ok(out)
}

fn subsets(
    pairs: &[(usize, usize)],
    size: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if chosen.len() == size {
        return emit(chosen);
    }
    for k in start..pairs.len() {
        if chosen.iter().any(|&c| pairs[c].1 == pairs[k].1) {
            continue;
        }
        chosen.push(k);
        subsets(pairs, size, k + 1, chosen, emit)?;
        chosen.pop();
    }
    Ok(())
}

/// Relaxation at one makespan guess and one guess of the expensive pairs.
#[derive(Clone, Debug)]
pub struct OutLp {
    pub lp: LinearProgram,
    pub edges: Vec<(usize, usize)>,
    pub t: f64,
}

impl OutLp {
    pub fn cost(&self, inst: &OutlierInstance, x: &[f64]) -> f64 {
        self.edges.iter().enumerate().map(|(k, &(i, j))| inst.c[i][j] * x[k]).sum()
    }

    pub fn profit(&self, inst: &OutlierInstance, x: &[f64]) -> f64 {
        self.edges.iter().enumerate().map(|(k, &(_, j))| inst.profits[j] * x[k]).sum()
    }

    pub fn fractional_loads(&self, inst: &OutlierInstance, x: &[f64]) -> Vec<f64> {
        let mut loads = vec![0.0; inst.machines];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            loads[i] += inst.p[i][j] * x[k];
        }
        loads
    }

    pub fn to_matrix(&self, x: &[f64], machines: usize, jobs: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; jobs]; machines];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            out[i][j] = x[k];
        }
        out
    }

    pub fn point_from_matrix(&self, x: &[Vec<f64>]) -> Result<Point> {
        let mut pt = Vec::with_capacity(self.edges.len());
        for &(i, j) in &self.edges {
            pt.push(
                *x.get(i)
                    .and_then(|r| r.get(j))
                    .ok_or_else(|| Error::InvalidInput(format!("fractional matrix lacks entry ({i},{j})")))?,
            );
        }
        Ok(Point(pt))
    }
}

/// Rows `Cost <= C`, `sum_i x_ij <= 1` (coverage `y_j` substituted),
/// `Load <= T` and `Profit >= Π`; guessed pairs fixed through their bounds.
/// The objective minimises cost.
pub fn build_lp_out(inst: &OutlierInstance, t: f64, guess: &Guess) -> Result<OutLp> {
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
    for (k, e) in edges.iter().enumerate() {
        lp.objective[k] = inst.c[e.0][e.1];
        match guess.forced.get(e) {
            Some(&true) => lp.set_bounds(k, 1.0, 1.0),
            Some(&false) => lp.set_bounds(k, 0.0, 0.0),
            None => lp.set_bounds(k, 0.0, 1.0),
        };
    }
    for pin in guess.ones() {
        if !edges.contains(&pin) {
            // a forced pair that cannot run within T
            lp.add(Constraint::eq(vec![], 1.0, Tag::Assign));
        }
    }
    let rows = |f: &dyn Fn(usize, usize) -> Option<f64>| -> Vec<(usize, f64)> {
        edges
            .iter()
            .enumerate()
            .filter_map(|(k, &(i, j))| f(i, j).map(|a| (k, a)))
            .collect()
    };
    lp.add(Constraint::le(rows(&|i, j| Some(inst.c[i][j])), inst.cost_budget, Tag::Cost));
    for jj in 0..inst.jobs {
        let r = rows(&|_, j| (j == jj).then_some(1.0));
        if !r.is_empty() {
            lp.add(Constraint::le(r, 1.0, Tag::Assign));
        }
    }
    for ii in 0..inst.machines {
        let r = rows(&|i, j| (i == ii).then_some(inst.p[i][j]));
        if !r.is_empty() {
            lp.add(Constraint::le(r, t, Tag::Load));
        }
    }
    lp.add(Constraint::ge(rows(&|_, j| Some(inst.profits[j])), inst.profit_floor, Tag::Profit));
    Ok(OutLp { lp, edges, t })
}

/// Terminal shapes of the floating subgraph when the walk is stuck at a
/// vertex. `n1` counts singleton jobs; unspecified nodes have degree 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Config {
    /// Disjoint even cycles, no singleton job.
    Cycles,
    /// Two singleton jobs.
    TwoSingletons,
    /// One singleton job and one degree-3 job.
    DegreeThreeJob,
    /// One singleton job and one degree-3 machine.
    DegreeThreeMachine,
    /// One singleton job and one degree-1 machine.
    DegreeOneMachine,
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Config::Cycles => "cycles",
            Config::TwoSingletons => "two-singletons",
            Config::DegreeThreeJob => "degree-three-job",
            Config::DegreeThreeMachine => "degree-three-machine",
            Config::DegreeOneMachine => "degree-one-machine",
        })
    }
}

/// Degree profile of a floating `(machine, job)` edge list.
fn degrees(edges: &[(usize, usize)]) -> (BTreeMap<usize, usize>, BTreeMap<usize, usize>) {
    let mut md = BTreeMap::new();
    let mut jd = BTreeMap::new();
    for &(i, j) in edges {
        *md.entry(i).or_insert(0) += 1;
        *jd.entry(j).or_insert(0) += 1;
    }
    (md, jd)
}

/// Classifies a floating subgraph given as `(machine, job)` edges.
pub fn classify_config(edges: &[(usize, usize)]) -> Option<Config> {
    if edges.is_empty() {
        return None;
    }
    let (md, jd) = degrees(edges);
    let count = |m: &BTreeMap<usize, usize>, d: usize| m.values().filter(|&&v| v == d).count();
    let (n1, n2, n3) = (count(&jd, 1), count(&jd, 2), count(&jd, 3));
    let (m1, m2, m3) = (count(&md, 1), count(&md, 2), count(&md, 3));
    let (nj, nm) = (jd.len(), md.len());
    if n1 + n2 + n3 != nj || m1 + m2 + m3 != nm {
        return None;
    }
    match (n1, n3, m1, m3) {
        (0, 0, 0, 0) => Some(Config::Cycles),
        (2, 0, 0, 0) => Some(Config::TwoSingletons),
        (1, 1, 0, 0) => Some(Config::DegreeThreeJob),
        (1, 0, 0, 1) => Some(Config::DegreeThreeMachine),
        (1, 0, 1, 0) => Some(Config::DegreeOneMachine),
        _ => None,
    }
}

/// Outcome of the combinatorial final step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Terminal {
    pub config: Config,
    /// `(job, machine)` for every floating job that gets scheduled.
    pub assign: Vec<(usize, usize)>,
    pub discarded: Option<usize>,
}

/// Finishes a vertex state. `edges[k]` is the `(machine, job)` pair of
/// variable `k`; `load_kept[i]` says whether machine `i` still has a load
/// row, which limits it to one extra job.
pub fn resolve_terminal(
    inst: &OutlierInstance,
    edges: &[(usize, usize)],
    x: &[f64],
    load_kept: &[bool],
    tol: f64,
) -> Result<Terminal> {
    let floating: Vec<usize> = (0..edges.len()).filter(|&k| x[k] > tol && x[k] < 1.0 - tol).collect();
    let fedges: Vec<(usize, usize)> = floating.iter().map(|&k| edges[k]).collect();
    let dump = || format!("floating subgraph {:?} at values {:?}", fedges, floating.iter().map(|&k| x[k]).collect::<Vec<_>>());
    let config = classify_config(&fedges)
        .ok_or_else(|| Error::InvariantViolation(format!("unrecognized terminal configuration: {}", dump())))?;
    let (md, jd) = degrees(&fedges);
    let val = |i: usize, j: usize| -> f64 {
        floating.iter().find(|&&k| edges[k] == (i, j)).map_or(0.0, |&k| x[k])
    };
    let mut discarded = None;
    let mut assign: Vec<(usize, usize)> = Vec::new();
    let singletons: Vec<usize> = jd.iter().filter(|(_, &d)| d == 1).map(|(&j, _)| j).collect();
    let machine_of = |j: usize| fedges.iter().find(|e| e.1 == j).unwrap().0;
    match config {
        Config::TwoSingletons => {
            let (j1, j2) = (singletons[0], singletons[1]);
            if val(machine_of(j1), j1) + val(machine_of(j2), j2) < 1.0 {
                // lower profit goes; on a tie the higher index goes
                discarded = Some(if inst.profits[j1] < inst.profits[j2] { j1 } else { j2 });
            }
        }
        Config::DegreeThreeMachine => {
            let i = *md.iter().find(|(_, &d)| d == 3).unwrap().0;
            let j3 = singletons[0];
            let others: Vec<usize> = fedges.iter().filter(|e| e.0 == i && e.1 != j3).map(|e| e.1).collect();
            if others.len() == 2 && machine_of(j3) == i {
                let (j1, j2) = (others[0].min(others[1]), others[0].max(others[1]));
                if val(i, j1) + val(i, j2) > 1.0 {
                    let cheaper = if inst.p[i][j1] <= inst.p[i][j2] { j1 } else { j2 };
                    assign.push((j3, i));
                    assign.push((cheaper, i));
                }
            }
        }
        _ => {}
    }
    // Remaining jobs go out by capacitated bipartite matching.
    let mut capacity: BTreeMap<usize, usize> = md
        .iter()
        .map(|(&i, &d)| (i, if load_kept[i] { 1 } else { d }))
        .collect();
    for &(_, i) in &assign {
        let c = capacity.get_mut(&i).unwrap();
        *c = c.saturating_sub(1);
    }
    let pending: Vec<usize> = jd
        .keys()
        .copied()
        .filter(|&j| Some(j) != discarded && !assign.iter().any(|a| a.0 == j))
        .collect();
    let slots: Vec<usize> = capacity.iter().flat_map(|(&i, &c)| std::iter::repeat(i).take(c)).collect();
    let mut slot_owner: Vec<Option<usize>> = vec![None; slots.len()];
    for &j in &pending {
        let mut seen = vec![false; slots.len()];
        if !augment(j, &fedges, &slots, &mut slot_owner, &mut seen) {
            return Err(Error::InvariantViolation(format!(
                "{config}: no machine slot left for job {j}; {}",
                dump()
            )));
        }
    }
    for (s, owner) in slot_owner.iter().enumerate() {
        if let Some(j) = owner {
            assign.push((*j, slots[s]));
        }
    }
    assign.sort_unstable();
    Ok(Terminal { config, assign, discarded })
}

fn augment(j: usize, edges: &[(usize, usize)], slots: &[usize], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for s in 0..slots.len() {
        if seen[s] || !edges.contains(&(slots[s], j)) {
            continue;
        }
        seen[s] = true;
        let free = match owner[s] {
            None => true,
            Some(other) => augment(other, edges, slots, owner, seen),
        };
        if free {
            owner[s] = Some(j);
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutlierSchedule {
    /// Machine of each job, `None` for dropped jobs.
    pub assign: Vec<Option<usize>>,
    pub profit: f64,
    pub cost: f64,
    pub makespan: f64,
    pub loads: Vec<f64>,
    pub t: f64,
    pub iterations: usize,
    pub iteration_bound: usize,
    pub terminal: Option<Terminal>,
}

struct WalkState {
    load_dropped: Vec<bool>,
    coverage_dropped: Vec<bool>,
    /// Jobs that have been singletons; membership is permanent.
    singleton: Vec<bool>,
}

fn walk_rows(
    inst: &OutlierInstance,
    edges: &[(usize, usize)],
    x: &[f64],
    y0: &[f64],
    load_rhs: &[f64],
    st: &WalkState,
) -> Vec<Constraint> {
    let mut rows = Vec::new();
    let mut by_job: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.jobs];
    let mut by_machine: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.machines];
    for (k, &(i, j)) in edges.iter().enumerate() {
        by_job[j].push((k, 1.0));
        if inst.p[i][j] != 0.0 {
            by_machine[i].push((k, inst.p[i][j]));
        }
    }
    let mut bundle: Vec<(usize, f64)> = Vec::new();
    for j in 0..inst.jobs {
        if by_job[j].is_empty() {
            continue;
        }
        if st.singleton[j] || st.coverage_dropped[j] {
            if inst.profits[j] != 0.0 {
                bundle.extend(by_job[j].iter().map(|&(k, _)| (k, inst.profits[j])));
            }
            if st.coverage_dropped[j] && !st.singleton[j] {
                rows.push(Constraint::le(by_job[j].clone(), 1.0, Tag::Assign));
            }
        } else {
            rows.push(Constraint::eq(by_job[j].clone(), y0[j], Tag::Assign));
        }
    }
    if !bundle.is_empty() {
        let value: f64 = bundle.iter().map(|&(k, a)| a * x[k]).sum();
        rows.push(Constraint::eq(bundle, value, Tag::BundleProfit));
    }
    for i in 0..inst.machines {
        if !st.load_dropped[i] && !by_machine[i].is_empty() {
            rows.push(Constraint::le(by_machine[i].clone(), load_rhs[i], Tag::Load));
        }
    }
    rows
}

fn round_with(
    inst: &OutlierInstance,
    out: &OutLp,
    x0: &[f64],
    mut pick: impl FnMut(&MoveBranches) -> bool,
) -> Result<OutlierSchedule> {
    let tol = DEFAULT_TOL;
    let n = out.edges.len();
    let viol = out.lp.max_violation(x0);
    if x0.len() != n || viol > 1e-6 {
        return Err(Error::InfeasiblePoint(format!(
            "fractional assignment violates the relaxation at T = {} by {viol}",
            out.t
        )));
    }
    let mut x = Point(x0.iter().map(|&v| if v <= tol { 0.0 } else if v >= 1.0 - tol { 1.0 } else { v }).collect());
    let mut y0 = vec![0.0; inst.jobs];
    for (k, &(_, j)) in out.edges.iter().enumerate() {
        y0[j] += x[k];
    }
    let load_rhs = out.fractional_loads(inst, &x);
    let mut st = WalkState {
        load_dropped: vec![false; inst.machines],
        coverage_dropped: vec![false; inst.jobs],
        singleton: vec![false; inst.jobs],
    };
    let bound = out.lp.constraints.len() + n;
    let mut iterations = 0;
    let mut terminal = None;
    loop {
        let floating: Vec<usize> = (0..n).filter(|&k| x[k] > tol && x[k] < 1.0 - tol).collect();
        if floating.is_empty() {
            break;
        }
        let mut mdeg = vec![0usize; inst.machines];
        let mut jdeg = vec![0usize; inst.jobs];
        let mut h = vec![0.0; inst.machines];
        let mut cover = vec![0.0; inst.jobs];
        for &k in &floating {
            let (i, j) = out.edges[k];
            mdeg[i] += 1;
            jdeg[j] += 1;
            h[i] += x[k];
            cover[j] += x[k];
        }
        for i in 0..inst.machines {
            if mdeg[i] == 1 {
                st.load_dropped[i] = true;
            }
        }
        for j in 0..inst.jobs {
            if jdeg[j] == 1 {
                st.singleton[j] = true;
            }
        }
        let system = |st: &WalkState, x: &[f64]| -> Result<Polytope> {
            Polytope::new(n, walk_rows(inst, &out.edges, x, &y0, &load_rhs, st))
        };
        let mut poly = system(&st, &x)?;
        if is_vertex(&poly, &x, tol)? {
            for j in 0..inst.jobs {
                if jdeg[j] >= 2 && !st.coverage_dropped[j] && cover[j] < 1.0 - tol {
                    st.coverage_dropped[j] = true;
                }
            }
            poly = system(&st, &x)?;
            if is_vertex(&poly, &x, tol)? {
                for i in 0..inst.machines {
                    let d = mdeg[i] as f64;
                    if mdeg[i] > 0 && h[i] >= d - 1.0 - inst.epsilon - tol {
                        st.load_dropped[i] = true;
                    }
                }
                poly = system(&st, &x)?;
                if is_vertex(&poly, &x, tol)? {
                    let m = mdeg.iter().filter(|&&d| d > 0).count();
                    if m as f64 >= 1.0 / inst.epsilon {
                        return Err(Error::InvariantViolation(format!(
                            "vertex with {m} floating machines at epsilon {}",
                            inst.epsilon
                        )));
                    }
                    let kept: Vec<bool> = st.load_dropped.iter().map(|d| !d).collect();
                    let t = resolve_terminal(inst, &out.edges, &x, &kept, tol)?;
                    for &k in &floating {
                        let (i, j) = out.edges[k];
                        x[k] = if t.assign.contains(&(j, i)) { 1.0 } else { 0.0 };
                    }
                    terminal = Some(t);
                    break;
                }
            }
        }
        let branches = match rand_move_branches(&poly, &x, tol) {
            Ok(b) => b,
            Err(Error::AtVertex) | Err(Error::DegenerateDirection) => {
                return Err(Error::InvariantViolation("walk stalled outside the terminal step".into()));
            }
            Err(e) => return Err(e),
        };
        x = if pick(&branches) { branches.plus } else { branches.minus };
        iterations += 1;
        if iterations > bound {
            return Err(Error::InvariantViolation(format!("walk exceeded {bound} iterations")));
        }
    }
    let mut assign = vec![None; inst.jobs];
    for (k, &(i, j)) in out.edges.iter().enumerate() {
        if x[k] == 1.0 {
            if assign[j].is_some() {
                return Err(Error::InvariantViolation(format!("job {j} scheduled twice")));
            }
            assign[j] = Some(i);
        }
    }
    let mut loads = vec![0.0; inst.machines];
    let (mut profit, mut cost) = (0.0, 0.0);
    for (j, a) in assign.iter().enumerate() {
        if let Some(i) = *a {
            loads[i] += inst.p[i][j];
            cost += inst.c[i][j];
            profit += inst.profits[j];
        }
    }
    Ok(OutlierSchedule {
        assign,
        profit,
        cost,
        makespan: loads.iter().copied().fold(0.0, f64::max),
        loads,
        t: out.t,
        iterations,
        iteration_bound: bound,
        terminal,
    })
}

/// Randomized rounding; edge marginals are kept until the final step.
pub fn sched_outlier_round<R: Rng + ?Sized>(
    inst: &OutlierInstance,
    out: &OutLp,
    x: &[f64],
    rng: &mut R,
) -> Result<OutlierSchedule> {
    round_with(inst, out, x, |b| rng.gen::<f64>() < b.prob_plus())
}

/// Rounding that never lets the cost functional rise before the final step.
pub fn derandomize_outlier(inst: &OutlierInstance, out: &OutLp, x: &[f64]) -> Result<OutlierSchedule> {
    round_with(inst, out, x, |b| out.cost(inst, &b.plus) <= out.cost(inst, &b.minus))
}

/// First guess whose relaxation is feasible at `t`.
pub fn feasible_guess(inst: &OutlierInstance, t: f64, guesses: &[Guess]) -> Result<Option<(OutLp, Point)>> {
    for g in guesses {
        let out = build_lp_out(inst, t, g)?;
        let sol = lpsolve::solve(&out.lp)?;
        if sol.status == LpStatus::Optimal {
            return Ok(Some((out, sol.values)));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize)]
pub struct OutlierSolution {
    pub t: f64,
    pub lp_cost: f64,
    pub lp_profit: f64,
    pub fractional: Vec<Vec<f64>>,
    pub schedule: OutlierSchedule,
}

/// Searches the smallest makespan guess with some feasible guess of the
/// expensive pairs, then rounds deterministically.
pub fn solve_outlier(inst: &OutlierInstance, precision: Option<f64>, budget: usize) -> Result<OutlierSolution> {
    let guesses = enumerate_guesses(inst, budget)?;
    let t = match inst.makespan_target {
        Some(t) => t,
        None => {
            let hi: f64 = (0..inst.jobs)
                .map(|j| (0..inst.machines).map(|i| inst.p[i][j]).fold(0.0, f64::max))
                .sum();
            let total: f64 = inst.p.iter().flatten().sum();
            let prec = precision.unwrap_or(1e-6 * total.max(1.0));
            search_threshold(hi, inst.p_integral(), prec, |t| Ok(feasible_guess(inst, t, &guesses)?.is_some()))?
                .ok_or_else(|| Error::Infeasible("no guess admits a feasible relaxation".into()))?
        }
    };
    let (out, x) = feasible_guess(inst, t, &guesses)?
        .ok_or_else(|| Error::Infeasible(format!("no guess admits a feasible relaxation at T = {t}")))?;
    let schedule = derandomize_outlier(inst, &out, &x)?;
    Ok(OutlierSolution {
        t,
        lp_cost: out.cost(inst, &x),
        lp_profit: out.profit(inst, &x),
        fractional: out.to_matrix(&x, inst.machines, inst.jobs),
        schedule,
    })
}
