//! Max-min fair allocation of indivisible goods.
//!
//! The uncapacitated pipeline solves a configuration LP at the largest
//! feasible threshold `T`, draws a random matching on the big goods
//! (utility at least `T/λ`) by dependent rounding, lets unmatched persons
//! claim a sampled bundle of small goods, and settles goods claimed by several
//! persons with a utility-weighted dependent rounding.
//!
//! The capacitated variant runs the shared assignment walk with persons in
//! the role of machines, utility floors in place of load rows and per-person
//! good caps as capacity rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::depround::{self, BipartiteFractional, Node, Walk};
use crate::error::{Error, Result};
use crate::gapcap::check_matrix;
use crate::lpsolve::{self, LinearProgram, LpStatus, Sense};
use crate::polytope::{Constraint, Relation, Tag, DEFAULT_TOL};
use crate::walk::{CapWalk, Edge};

/// Default cap on enumerated configurations across all persons.
pub const DEFAULT_CONFIG_BUDGET: usize = 200_000;

/// Default relative precision of the threshold search.
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMinInstance {
    pub persons: usize,
    pub goods: usize,
    /// `u[i][j]`, utility of good `j` to person `i`.
    pub u: Vec<Vec<f64>>,
    /// Per-person limit on the number of goods received.
    pub caps: Option<Vec<u32>>,
}

impl MaxMinInstance {
    pub fn new(u: Vec<Vec<f64>>, caps: Option<Vec<u32>>) -> Result<Self> {
        let inst = Self {
            persons: u.len(),
            goods: u.first().map_or(0, Vec::len),
            u,
            caps,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.persons == 0 {
            return Err(Error::InvalidInput("at least one person is required".into()));
        }
        check_matrix("u", &self.u, self.persons, self.goods)?;
        if let Some(c) = &self.caps {
            if c.len() != self.persons {
                return Err(Error::InvalidInput(format!("caps needs {} entries", self.persons)));
            }
        }
        Ok(())
    }

    pub fn cap(&self, i: usize) -> Option<u32> {
        self.caps.as_ref().map(|c| c[i])
    }

    pub fn max_utility(&self, i: usize) -> f64 {
        self.u[i].iter().copied().fold(0.0, f64::max)
    }
}

/// Final owner of every good and the resulting per-person totals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Allocation {
    pub owner: Vec<Option<usize>>,
    pub utilities: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Allocation {
    pub fn from_owner(inst: &MaxMinInstance, owner: Vec<Option<usize>>) -> Self {
        let mut utilities = vec![0.0; inst.persons];
        let mut counts = vec![0; inst.persons];
        for (j, o) in owner.iter().enumerate() {
            if let Some(i) = *o {
                utilities[i] += inst.u[i][j];
                counts[i] += 1;
            }
        }
        Self { owner, utilities, counts }
    }

    pub fn min_utility(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Scale factor `λ` splitting big from small goods, and the pruning level
/// `ε₁` for goods that are likely matched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Params {
    pub lambda: f64,
    pub eps1: f64,
}

impl Params {
    /// `λ = 2·sqrt(k·ℓ)` and `ε₁ = sqrt(ℓ/k)` with `ℓ = ln k / ln ln k`;
    /// `ℓ = 1` while `ln ln k <= 1`, where the ratio is undefined or below 1.
    pub fn for_persons(k: usize) -> Self {
        let kf = k.max(1) as f64;
        let ell = if kf > std::f64::consts::E.powf(std::f64::consts::E) {
            kf.ln() / kf.ln().ln()
        } else {
            1.0
        };
        Self {
            lambda: (2.0 * kf.sqrt() * ell.sqrt()).max(1.0),
            eps1: (ell.sqrt() / kf.sqrt()).min(0.5),
        }
    }
}

/// A valid bundle for one person: a single big good, or a minimal set of
/// small goods worth at least `T`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bundle {
    pub goods: Vec<usize>,
    pub big: bool,
}

pub fn enumerate_valid_configs(
    inst: &MaxMinInstance,
    person: usize,
    t: f64,
    lambda: f64,
    budget: &mut usize,
) -> Result<Vec<Bundle>> {
    let u = &inst.u[person];
    let big_level = t / lambda;
    let mut out: Vec<Bundle> = (0..inst.goods)
        .filter(|&j| u[j] > 0.0 && u[j] >= big_level)
        .map(|j| Bundle { goods: vec![j], big: true })
        .collect();
    let small: Vec<usize> = (0..inst.goods).filter(|&j| u[j] > 0.0 && u[j] < big_level).collect();
    // suffix[k] = utility of small[k..]
    let mut suffix = vec![0.0; small.len() + 1];
    for k in (0..small.len()).rev() {
        suffix[k] = suffix[k + 1] + u[small[k]];
    }
    let mut chosen = Vec::new();
    minimal_bundles(u, &small, &suffix, t, 0, 0.0, &mut chosen, &mut out, budget)?;
    if out.len() > *budget {
        return Err(budget_error(inst));
    }
    *budget -= out.len();
    Ok(out)
}

fn budget_error(inst: &MaxMinInstance) -> Error {
    Error::BudgetExceeded(format!(
        "too many configurations over {} goods; use fewer goods or a larger threshold",
        inst.goods
    ))
}

#[allow(clippy::too_many_arguments)]
fn minimal_bundles(
    u: &[f64],
    small: &[usize],
    suffix: &[f64],
    t: f64,
    start: usize,
    sum: f64,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Bundle>,
    budget: &mut usize,
) -> Result<()> {
    if sum >= t {
        let lightest = chosen.iter().map(|&j| u[j]).fold(f64::INFINITY, f64::min);
        if sum - lightest < t {
            if out.len() >= *budget {
                return Err(Error::BudgetExceeded(format!(
                    "more than {} configurations; use fewer goods or a larger threshold",
                    *budget
                )));
            }
            out.push(Bundle { goods: chosen.clone(), big: false });
        }
        return Ok(());
    }
    if sum + suffix[start] < t {
        return Ok(());
    }
    for k in start..small.len() {
        chosen.push(small[k]);
        minimal_bundles(u, small, suffix, t, k + 1, sum + u[small[k]], chosen, out, budget)?;
        chosen.pop();
    }
    Ok(())
}

/// Configuration LP solution at one threshold.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigLp {
    pub t: f64,
    pub lambda: f64,
    pub configs: Vec<Vec<Bundle>>,
    /// `x[i][c]` is the weight of `configs[i][c]`.
    pub x: Vec<Vec<f64>>,
}

impl ConfigLp {
    /// Largest violation of `sum_C x_iC = 1` and `sum_{i, C ∋ j} x_iC <= 1`.
    pub fn max_violation(&self, goods: usize) -> f64 {
        let mut worst: f64 = 0.0;
        let mut load = vec![0.0; goods];
        for (cs, xs) in self.configs.iter().zip(&self.x) {
            worst = worst.max((xs.iter().sum::<f64>() - 1.0).abs());
            for (c, &v) in cs.iter().zip(xs) {
                worst = worst.max(-v);
                for &j in &c.goods {
                    load[j] += v;
                }
            }
        }
        load.iter().fold(worst, |w, &l| w.max(l - 1.0))
    }
}

/// Explicit configuration LP at threshold `t`; `None` when infeasible.
pub fn solve_config_lp(inst: &MaxMinInstance, t: f64, lambda: f64) -> Result<Option<ConfigLp>> {
    let mut budget = DEFAULT_CONFIG_BUDGET;
    solve_config_lp_with_budget(inst, t, lambda, &mut budget)
}

fn solve_config_lp_with_budget(
    inst: &MaxMinInstance,
    t: f64,
    lambda: f64,
    budget: &mut usize,
) -> Result<Option<ConfigLp>> {
    inst.validate()?;
    if !(t > 0.0) || !(lambda >= 1.0) {
        return Err(Error::InvalidInput(format!("threshold {t} and lambda {lambda} must be positive, lambda >= 1")));
    }
    let mut configs = Vec::with_capacity(inst.persons);
    for i in 0..inst.persons {
        let cs = enumerate_valid_configs(inst, i, t, lambda, budget)?;
        if cs.is_empty() {
            return Ok(None);
        }
        configs.push(cs);
    }
    let mut offset = Vec::with_capacity(inst.persons);
    let mut n = 0;
    for cs in &configs {
        offset.push(n);
        n += cs.len();
    }
    let mut lp = LinearProgram::new(n, Sense::Minimize);
    let mut by_good: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.goods];
    for (i, cs) in configs.iter().enumerate() {
        lp.add(Constraint::eq((0..cs.len()).map(|c| (offset[i] + c, 1.0)).collect(), 1.0, Tag::Assign));
        for (c, b) in cs.iter().enumerate() {
            for &j in &b.goods {
                by_good[j].push((offset[i] + c, 1.0));
            }
        }
    }
    for row in by_good.into_iter().filter(|r| !r.is_empty()) {
        lp.add(Constraint::le(row, 1.0, Tag::Capacity));
    }
    let sol = lpsolve::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x = configs
        .iter()
        .enumerate()
        .map(|(i, cs)| (0..cs.len()).map(|c| sol.values[offset[i] + c].clamp(0.0, 1.0)).collect())
        .collect();
    Ok(Some(ConfigLp { t, lambda, configs, x }))
}

/// Largest feasible threshold up to relative precision `eps`, or `None` when
/// no positive threshold is feasible.
pub fn search_config_lp(inst: &MaxMinInstance, lambda: f64, eps: f64) -> Result<Option<ConfigLp>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {eps} must lie in (0,1)")));
    }
    let hi = (0..inst.persons).map(|i| inst.u[i].iter().sum::<f64>()).fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) {
        return Ok(None);
    }
    let probe = |t: f64| {
        let mut budget = DEFAULT_CONFIG_BUDGET;
        solve_config_lp_with_budget(inst, t, lambda, &mut budget)
    };
    if let Some(lp) = probe(hi)? {
        return Ok(Some(lp));
    }
    let (mut lo, mut best, mut hi) = (0.0, None, hi);
    while hi - lo > eps * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Some(lp) => {
                lo = mid;
                best = Some(lp);
            }
            None => hi = mid,
        }
    }
    Ok(best)
}

/// Person/good graph of the LP marginals `w_ij = sum_{C ∋ j} x_iC`.
#[derive(Clone, Debug, Serialize)]
pub struct FlowMatchGraph {
    pub t: f64,
    pub lambda: f64,
    pub w: Vec<Vec<f64>>,
    /// `u_ij >= T/λ`.
    pub matching: Vec<Vec<bool>>,
    pub m_person: Vec<f64>,
    pub m_good: Vec<f64>,
}

impl FlowMatchGraph {
    pub fn from_lp(inst: &MaxMinInstance, lp: &ConfigLp) -> Self {
        let mut w = vec![vec![0.0; inst.goods]; inst.persons];
        for (i, (cs, xs)) in lp.configs.iter().zip(&lp.x).enumerate() {
            for (c, &v) in cs.iter().zip(xs) {
                for &j in &c.goods {
                    w[i][j] += v;
                }
            }
        }
        for v in w.iter_mut().flatten() {
            *v = snap(*v, 1e-9).min(1.0);
        }
        let big = lp.t / lp.lambda;
        let matching: Vec<Vec<bool>> = (0..inst.persons)
            .map(|i| (0..inst.goods).map(|j| inst.u[i][j] > 0.0 && inst.u[i][j] >= big).collect())
            .collect();
        // keep matching degrees at most 1 despite LP round-off
        for i in 0..inst.persons {
            let s: f64 = (0..inst.goods).filter(|&j| matching[i][j]).map(|j| w[i][j]).sum();
            if s > 1.0 {
                (0..inst.goods).filter(|&j| matching[i][j]).for_each(|j| w[i][j] /= s);
            }
        }
        for j in 0..inst.goods {
            let s: f64 = (0..inst.persons).filter(|&i| matching[i][j]).map(|i| w[i][j]).sum();
            if s > 1.0 {
                (0..inst.persons).filter(|&i| matching[i][j]).for_each(|i| w[i][j] /= s);
            }
        }
        let mut m_person = vec![0.0; inst.persons];
        let mut m_good = vec![0.0; inst.goods];
        for i in 0..inst.persons {
            for j in 0..inst.goods {
                if matching[i][j] {
                    m_person[i] += w[i][j];
                    m_good[j] += w[i][j];
                }
            }
        }
        Self { t: lp.t, lambda: lp.lambda, w, matching, m_person, m_good }
    }

    pub fn f_person(&self, i: usize) -> f64 {
        1.0 - self.m_person[i]
    }

    pub fn f_good(&self, j: usize) -> f64 {
        1.0 - self.m_good[j]
    }

    fn matching_graph(&self) -> BipartiteFractional {
        let (k, m) = (self.w.len(), self.m_good.len());
        let mut g = BipartiteFractional::new(k, m);
        for i in 0..k {
            for j in 0..m {
                if self.matching[i][j] && self.w[i][j] > 0.0 {
                    g.insert(i, j, self.w[i][j]).expect("edge inside the graph");
                }
            }
        }
        g
    }
}

fn snap(v: f64, tol: f64) -> f64 {
    if v.abs() <= tol {
        0.0
    } else if (v - 1.0).abs() <= tol {
        1.0
    } else {
        v
    }
}

/// Dependent rounding on the matching edges; entry `i` is the good person `i`
/// is matched to. A vertex is saturated with probability equal to its
/// matching mass.
pub fn sample_matching<R: Rng + ?Sized>(g: &FlowMatchGraph, rng: &mut R) -> Vec<Option<usize>> {
    let rounded = depround::round_all(&g.matching_graph(), rng);
    let mut matched = vec![None; g.w.len()];
    for ((i, j), v) in rounded.edges() {
        if v == 1.0 {
            debug_assert!(matched[i].is_none());
            matched[i] = Some(j);
        }
    }
    matched
}

/// Each unmatched person samples a small bundle with probability
/// `x_iC / f_i` and keeps its goods that are unmatched and have matching
/// mass below `1 - ε₁`.
pub fn claim_bundles<R: Rng + ?Sized>(
    g: &FlowMatchGraph,
    lp: &ConfigLp,
    matched: &[Option<usize>],
    eps1: f64,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut taken = vec![false; g.m_good.len()];
    for j in matched.iter().flatten() {
        taken[*j] = true;
    }
    let mut claims = vec![Vec::new(); matched.len()];
    for (i, claim) in claims.iter_mut().enumerate() {
        let f = g.f_person(i);
        if matched[i].is_some() || f <= DEFAULT_TOL {
            continue;
        }
        let smalls: Vec<(usize, f64)> = lp.configs[i]
            .iter()
            .zip(&lp.x[i])
            .enumerate()
            .filter(|(_, (c, &v))| !c.big && v > 0.0)
            .map(|(k, (_, &v))| (k, v))
            .collect();
        let Some(&(last, _)) = smalls.last() else { continue };
        let total: f64 = smalls.iter().map(|s| s.1).sum();
        let mut r = rng.gen::<f64>() * total;
        let mut pick = last;
        for &(k, v) in &smalls {
            if r < v {
                pick = k;
                break;
            }
            r -= v;
        }
        *claim = lp.configs[i][pick]
            .goods
            .iter()
            .copied()
            .filter(|&j| !taken[j] && g.m_good[j] < 1.0 - eps1)
            .collect();
    }
    claims
}

/// Claimed edges with value `w_ij / f_i`, zero-utility edges removed, and
/// each good's total scaled down to at most 1.
pub fn contention_graph(inst: &MaxMinInstance, g: &FlowMatchGraph, claims: &[Vec<usize>]) -> BipartiteFractional {
    let mut vals = vec![vec![0.0; inst.goods]; inst.persons];
    for (i, claim) in claims.iter().enumerate() {
        let f = g.f_person(i);
        for &j in claim {
            if inst.u[i][j] > 0.0 && f > 0.0 {
                vals[i][j] = (g.w[i][j] / f).min(1.0);
            }
        }
    }
    for j in 0..inst.goods {
        let s: f64 = (0..inst.persons).map(|i| vals[i][j]).sum();
        if s > 1.0 {
            (0..inst.persons).for_each(|i| vals[i][j] /= s);
        }
    }
    let mut out = BipartiteFractional::new(inst.persons, inst.goods);
    for i in 0..inst.persons {
        for j in 0..inst.goods {
            if vals[i][j] > 0.0 {
                out.insert(i, j, vals[i][j]).expect("value in [0,1]");
            }
        }
    }
    out
}

/// Per-person `sum_j value_ij · u_ij` over a person/good graph.
pub fn graph_utilities(inst: &MaxMinInstance, g: &BipartiteFractional) -> Vec<f64> {
    let mut out = vec![0.0; inst.persons];
    for ((i, j), v) in g.edges() {
        out[i] += v * inst.u[i][j];
    }
    out
}

/// Both outcomes of one contention step. On a path `plus` is taken with
/// probability `γ/(μ+γ)`; on a cycle `forced` names the branch that does not
/// lower the utility of the cycle's first person.
#[derive(Clone, Debug)]
pub struct ContentionStep {
    pub walk: Walk,
    /// Change of each walk edge per unit of travel.
    pub coeffs: Vec<f64>,
    pub mu: f64,
    pub gamma: f64,
    pub plus: BipartiteFractional,
    pub minus: BipartiteFractional,
    pub forced: Option<bool>,
}

impl ContentionStep {
    pub fn prob_plus(&self) -> f64 {
        match self.forced {
            Some(true) => 1.0,
            Some(false) => 0.0,
            None => self.gamma / (self.mu + self.gamma),
        }
    }
}

pub fn contention_step(u: &[Vec<f64>], g: &BipartiteFractional) -> Result<ContentionStep> {
    let mut walk = g.find_walk().ok_or(Error::NothingToRound)?;
    if walk.closed && matches!(walk.nodes[0], Node::Right(_)) {
        walk.nodes.rotate_left(1);
        walk.edges.rotate_left(1);
    }
    let s = walk.edges.len();
    let mut coeffs = vec![1.0; s];
    for t in 0..s.saturating_sub(1) {
        coeffs[t + 1] = match walk.nodes[t + 1] {
            Node::Right(_) => -coeffs[t],
            Node::Left(v) => {
                let (prev, next) = (walk.edges[t].1, walk.edges[t + 1].1);
                if u[v][next] <= 0.0 {
                    return Err(Error::InvariantViolation(format!(
                        "person {v} pivots through zero-utility good {next}"
                    )));
                }
                -coeffs[t] * u[v][prev] / u[v][next]
            }
        };
    }
    let (mut mu, mut gamma) = (f64::INFINITY, f64::INFINITY);
    let (mut mu_at, mut gamma_at) = (0, 0);
    for (t, e) in walk.edges.iter().enumerate() {
        let (y, a) = (g.value(e.0, e.1), coeffs[t]);
        let (up, down) = if a > 0.0 { ((1.0 - y) / a, y / a) } else { (y / -a, (1.0 - y) / -a) };
        if up < mu {
            mu = up;
            mu_at = t;
        }
        if down < gamma {
            gamma = down;
            gamma_at = t;
        }
    }
    let forced = walk.closed.then(|| {
        let Node::Left(v0) = walk.nodes[0] else { unreachable!("cycle rotated to a person") };
        let d = u[v0][walk.edges[0].1] * coeffs[0] + u[v0][walk.edges[s - 1].1] * coeffs[s - 1];
        d >= 0.0
    });
    let plus = shifted(g, &walk, &coeffs, mu, mu_at);
    let minus = shifted(g, &walk, &coeffs, -gamma, gamma_at);
    Ok(ContentionStep { walk, coeffs, mu, gamma, plus, minus, forced })
}

fn shifted(g: &BipartiteFractional, walk: &Walk, coeffs: &[f64], delta: f64, settles: usize) -> BipartiteFractional {
    let mut out = g.clone();
    for (t, e) in walk.edges.iter().enumerate() {
        let mut v = snap((g.value(e.0, e.1) + delta * coeffs[t]).clamp(0.0, 1.0), 1e-9);
        if t == settles {
            v = v.round();
        }
        out.insert(e.0, e.1, v).expect("value clamped to [0,1]");
    }
    out
}

/// Settles every claimed good; entry `j` is the receiving person.
pub fn resolve_contention<R: Rng + ?Sized>(
    inst: &MaxMinInstance,
    claims: &BipartiteFractional,
    rng: &mut R,
) -> Result<Vec<Option<usize>>> {
    let mut g = claims.clone();
    let limit = g.num_edges() + 1;
    let mut steps = 0;
    while g.has_fractional() {
        let step = contention_step(&inst.u, &g)?;
        g = if rng.gen::<f64>() < step.prob_plus() { step.plus } else { step.minus };
        steps += 1;
        if steps > limit {
            return Err(Error::InvariantViolation(format!("contention rounding exceeded {limit} steps")));
        }
    }
    let mut owner = vec![None; inst.goods];
    for ((i, j), v) in g.edges() {
        if v.round() == 1.0 {
            if owner[j].is_some() {
                return Err(Error::InvariantViolation(format!("good {j} allocated twice")));
            }
            owner[j] = Some(i);
        }
    }
    Ok(owner)
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxMinOutcome {
    pub t: f64,
    pub params: Params,
    pub matched: Vec<Option<usize>>,
    pub claims: Vec<Vec<usize>>,
    /// Fractional utility of each person entering contention resolution.
    pub contention_utility: Vec<f64>,
    pub allocation: Allocation,
}

impl MaxMinOutcome {
    pub fn ratio(&self) -> f64 {
        if self.t > 0.0 {
            self.allocation.min_utility() / self.t
        } else {
            1.0
        }
    }
}

/// Full uncapacitated pipeline with the default `λ` and `ε₁` for the number
/// of persons.
pub fn maxmin_solve<R: Rng + ?Sized>(inst: &MaxMinInstance, eps: f64, rng: &mut R) -> Result<MaxMinOutcome> {
    maxmin_solve_with(inst, eps, Params::for_persons(inst.persons), rng)
}

pub fn maxmin_solve_with<R: Rng + ?Sized>(
    inst: &MaxMinInstance,
    eps: f64,
    params: Params,
    rng: &mut R,
) -> Result<MaxMinOutcome> {
    inst.validate()?;
    let Some(lp) = search_config_lp(inst, params.lambda, eps)? else {
        return Ok(MaxMinOutcome {
            t: 0.0,
            params,
            matched: vec![None; inst.persons],
            claims: vec![Vec::new(); inst.persons],
            contention_utility: vec![0.0; inst.persons],
            allocation: Allocation::from_owner(inst, vec![None; inst.goods]),
        });
    };
    let g = FlowMatchGraph::from_lp(inst, &lp);
    let matched = sample_matching(&g, rng);
    let claims = claim_bundles(&g, &lp, &matched, params.eps1, rng);
    let cg = contention_graph(inst, &g, &claims);
    let contention_utility = graph_utilities(inst, &cg);
    let mut owner = resolve_contention(inst, &cg, rng)?;
    for (i, m) in matched.iter().enumerate() {
        if let Some(j) = *m {
            if owner[j].is_some() {
                return Err(Error::InvariantViolation(format!("matched good {j} was also claimed")));
            }
            owner[j] = Some(i);
        }
    }
    Ok(MaxMinOutcome {
        t: lp.t,
        params,
        matched,
        claims,
        contention_utility,
        allocation: Allocation::from_owner(inst, owner),
    })
}

/// Maximises `t` subject to `sum_j u_ij x_ij >= t`, each good used at most
/// once and each person below its cap. Returns `(t, x)`.
pub fn solve_cap_assignment_lp(inst: &MaxMinInstance) -> Result<(f64, Vec<Vec<f64>>)> {
    inst.validate()?;
    let (k, m) = (inst.persons, inst.goods);
    let var = |i: usize, j: usize| i * m + j;
    let tv = k * m;
    let mut lp = LinearProgram::new(k * m + 1, Sense::Maximize);
    lp.objective[tv] = 1.0;
    for v in 0..k * m {
        lp.set_bounds(v, 0.0, 1.0);
    }
    for i in 0..k {
        let mut row: Vec<(usize, f64)> = (0..m).filter(|&j| inst.u[i][j] > 0.0).map(|j| (var(i, j), inst.u[i][j])).collect();
        row.push((tv, -1.0));
        lp.add(Constraint::ge(row, 0.0, Tag::Load));
        if let Some(c) = inst.cap(i) {
            if m > 0 {
                lp.add(Constraint::le((0..m).map(|j| (var(i, j), 1.0)).collect(), c as f64, Tag::Capacity));
            }
        }
    }
    for j in 0..m {
        lp.add(Constraint::le((0..k).map(|i| (var(i, j), 1.0)).collect(), 1.0, Tag::Assign));
    }
    let sol = lpsolve::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::SolverFailure(format!("assignment LP ended {:?}", sol.status)));
    }
    let x = (0..k)
        .map(|i| (0..m).map(|j| if inst.u[i][j] > 0.0 { sol.values[var(i, j)].clamp(0.0, 1.0) } else { 0.0 }).collect())
        .collect();
    Ok((sol.values[tv], x))
}

#[derive(Clone, Debug, Serialize)]
pub struct CapRound {
    pub allocation: Allocation,
    /// Fractional utility of each person at the start.
    pub targets: Vec<f64>,
    pub iterations: usize,
    pub iteration_bound: usize,
}

/// Rounds a fractional allocation `x` (goods used at most once, caps
/// respected) so that every person keeps its cap and loses less than its
/// largest single utility.
pub fn maxmin_cap_round<R: Rng + ?Sized>(inst: &MaxMinInstance, x: &[Vec<f64>], rng: &mut R) -> Result<CapRound> {
    inst.validate()?;
    let (k, m) = (inst.persons, inst.goods);
    check_matrix("x", x, k, m)?;
    let tol = 1e-7;
    for j in 0..m {
        let s: f64 = (0..k).map(|i| x[i][j]).sum();
        if s > 1.0 + tol {
            return Err(Error::InfeasiblePoint(format!("good {j} is allocated {s} > 1 times")));
        }
    }
    for i in 0..k {
        let s: f64 = x[i].iter().sum();
        if let Some(c) = inst.cap(i) {
            if s > c as f64 + tol {
                return Err(Error::InfeasiblePoint(format!("person {i} holds {s} goods, cap {c}")));
            }
        }
    }
    let mut edges = Vec::new();
    let mut x0 = Vec::new();
    let mut sink_mass = vec![1.0; m];
    for i in 0..k {
        for j in 0..m {
            if inst.u[i][j] > 0.0 && x[i][j] > 0.0 {
                edges.push(Edge { machine: i, job: j, weight: inst.u[i][j] });
                x0.push(x[i][j].min(1.0));
                sink_mass[j] -= x[i][j].min(1.0);
            }
        }
    }
    for (j, &s) in sink_mass.iter().enumerate() {
        edges.push(Edge { machine: k, job: j, weight: 0.0 });
        x0.push(s.clamp(0.0, 1.0));
    }
    let mut targets = vec![0.0; k];
    for (e, &v) in edges.iter().zip(&x0) {
        if e.machine < k {
            targets[e.machine] += e.weight * v;
        }
    }
    let mut load_rhs = targets.clone();
    load_rhs.push(0.0);
    let mut caps: Vec<Option<f64>> = (0..k).map(|i| inst.cap(i).map(f64::from)).collect();
    caps.push(None);
    let walk = CapWalk {
        edges: &edges,
        machines: k + 1,
        jobs: m,
        load_rhs,
        load_relation: Relation::Ge,
        caps,
        sink: Some(k),
        tol,
    };
    let out = walk.run(&x0, |b| rng.gen::<f64>() < b.prob_plus())?;
    let mut owner = vec![None; m];
    for (e, &v) in edges.iter().zip(out.x.iter()) {
        if v == 1.0 && e.machine < k {
            owner[e.job] = Some(e.machine);
        }
    }
    let allocation = Allocation::from_owner(inst, owner);
    for i in 0..k {
        if let Some(c) = inst.cap(i) {
            if allocation.counts[i] > c as usize {
                return Err(Error::InvariantViolation(format!(
                    "person {i} received {} goods over cap {c}",
                    allocation.counts[i]
                )));
            }
        }
    }
    Ok(CapRound { allocation, targets, iterations: out.iterations, iteration_bound: out.bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(u: Vec<Vec<f64>>) -> MaxMinInstance {
        MaxMinInstance::new(u, None).unwrap()
    }

    fn configs(i: &MaxMinInstance, t: f64, lambda: f64) -> Vec<Vec<usize>> {
        let mut budget = 1000;
        enumerate_valid_configs(i, 0, t, lambda, &mut budget)
            .unwrap()
            .into_iter()
            .map(|b| b.goods)
            .collect()
    }

    #[test]
    fn big_goods_are_singletons() {
        let i = inst(vec![vec![4.0, 4.0]]);
        assert_eq!(configs(&i, 4.0, 2.0), vec![vec![0], vec![1]]);
    }

    #[test]
    fn three_halves_give_three_pairs() {
        let i = inst(vec![vec![2.0, 2.0, 2.0]]);
        assert_eq!(configs(&i, 4.0, 1.5), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn worthless_goods_give_no_configs() {
        let i = inst(vec![vec![0.0, 0.0]]);
        assert!(configs(&i, 1.0, 2.0).is_empty());
        assert!(solve_config_lp(&i, 1.0, 2.0).unwrap().is_none());
    }

    #[test]
    fn single_big_good_lp() {
        let i = inst(vec![vec![5.0]]);
        let lp = solve_config_lp(&i, 5.0, 2.0).unwrap().unwrap();
        assert_eq!(lp.x, vec![vec![1.0]]);
    }

    #[test]
    fn shared_big_good_is_infeasible() {
        let i = inst(vec![vec![5.0], vec![5.0]]);
        assert!(solve_config_lp(&i, 1.0, 2.0).unwrap().is_none());
    }

    #[test]
    fn symmetric_small_goods_split() {
        let i = inst(vec![vec![1.0; 4], vec![1.0; 4]]);
        let lp = solve_config_lp(&i, 2.0, 2.83).unwrap().unwrap();
        assert!(lp.max_violation(4) < 1e-7);
    }

    #[test]
    fn params_at_small_k() {
        let p = Params::for_persons(1);
        assert_eq!(p.lambda, 2.0);
        assert_eq!(p.eps1, 0.5);
        let p = Params::for_persons(4);
        assert_eq!(p.lambda, 4.0);
        assert_eq!(p.eps1, 0.5);
    }

    #[test]
    fn whole_matching_edge_always_matches() {
        let i = inst(vec![vec![5.0]]);
        let lp = solve_config_lp(&i, 5.0, 2.0).unwrap().unwrap();
        let g = FlowMatchGraph::from_lp(&i, &lp);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_matching(&g, &mut rng), vec![Some(0)]);
    }

    #[test]
    fn one_claimant_keeps_its_mass() {
        let i = inst(vec![vec![10.0]]);
        let mut g = BipartiteFractional::new(1, 1);
        g.insert(0, 0, 0.7).unwrap();
        let step = contention_step(&i.u, &g).unwrap();
        assert!((step.prob_plus() - 0.7).abs() < 1e-12);
        assert_eq!(step.plus.value(0, 0), 1.0);
        assert_eq!(step.minus.value(0, 0), 0.0);
    }

    #[test]
    fn two_claimants_split_one_good() {
        let i = inst(vec![vec![3.0], vec![3.0]]);
        let mut g = BipartiteFractional::new(2, 1);
        g.insert(0, 0, 0.5).unwrap();
        g.insert(1, 0, 0.5).unwrap();
        let step = contention_step(&i.u, &g).unwrap();
        assert!((step.prob_plus() - 0.5).abs() < 1e-12);
        for out in [&step.plus, &step.minus] {
            assert_eq!(out.value(0, 0) + out.value(1, 0), 1.0);
        }
    }

    #[test]
    fn cycle_sign_never_hurts_first_person() {
        // p0 - g0 - p1 - g1 - p0 with lopsided utilities
        let i = inst(vec![vec![1.0, 4.0], vec![2.0, 1.0]]);
        let mut g = BipartiteFractional::new(2, 2);
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            g.insert(a, b, 0.5).unwrap();
        }
        let before = graph_utilities(&i, &g);
        let step = contention_step(&i.u, &g).unwrap();
        assert!(step.forced.is_some());
        let chosen = if step.forced == Some(true) { &step.plus } else { &step.minus };
        let after = graph_utilities(&i, chosen);
        let Node::Left(v0) = step.walk.nodes[0] else { panic!("cycle starts at a person") };
        let other = 1 - v0;
        assert!(after[v0] >= before[v0] - 1e-12);
        assert!((after[other] - before[other]).abs() < 1e-12);
    }

    #[test]
    fn integral_cap_input_is_kept() {
        let i = MaxMinInstance::new(vec![vec![3.0, 1.0], vec![1.0, 3.0]], Some(vec![1, 1])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = maxmin_cap_round(&i, &[vec![1.0, 0.0], vec![0.0, 1.0]], &mut rng).unwrap();
        assert_eq!(r.allocation.owner, vec![Some(0), Some(1)]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn single_person_cap_one_keeps_one_good() {
        let i = MaxMinInstance::new(vec![vec![4.0, 4.0]], Some(vec![1])).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = maxmin_cap_round(&i, &[vec![0.5, 0.5]], &mut rng).unwrap();
            assert_eq!(r.allocation.counts, vec![1]);
            assert_eq!(r.allocation.utilities, vec![4.0]);
        }
    }

    #[test]
    fn one_person_gets_everything_small() {
        let i = inst(vec![vec![1.0, 1.0, 1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = maxmin_solve(&i, 0.05, &mut rng).unwrap();
        assert_eq!(out.allocation.utilities, vec![3.0]);
        assert!((out.ratio() - 1.0).abs() < 1e-9);
    }
}
