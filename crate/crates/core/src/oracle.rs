//! Exhaustive solvers for tiny instances, in exact integer arithmetic.
//! Every entry of the input must be an integer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gapcap::{GapInstance, Schedule};
use crate::maxmin::{Allocation, MaxMinInstance};
use crate::outlier::OutlierInstance;

/// Largest number of assignments any oracle will enumerate.
pub const ORACLE_BUDGET: u64 = 10_000_000;

fn to_int(name: &str, v: f64) -> Result<i64> {
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(Error::InvalidInput(format!("{name} = {v} is not an integer")));
    }
    Ok(v as i64)
}

fn int_matrix(name: &str, a: &[Vec<f64>]) -> Result<Vec<Vec<i64>>> {
    a.iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().map(|(j, &v)| to_int(&format!("{name}[{i}][{j}]"), v)).collect())
        .collect()
}

fn check_budget(base: usize, exp: usize) -> Result<()> {
    let mut n: u64 = 1;
    for _ in 0..exp {
        n = n.saturating_mul(base as u64);
        if n > ORACLE_BUDGET {
            return Err(Error::BudgetExceeded(format!(
                "{base}^{exp} assignments exceed the oracle budget of {ORACLE_BUDGET}"
            )));
        }
    }
    Ok(())
}

/// Visits every vector in `{0..base}^len` in lexicographic order.
fn for_each_assignment(base: usize, len: usize, mut visit: impl FnMut(&[usize])) {
    let mut a = vec![0usize; len];
    loop {
        visit(&a);
        let mut k = len;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            a[k] += 1;
            if a[k] < base {
                break;
            }
            a[k] = 0;
        }
    }
}

/// Minimum-makespan assignment respecting the capacities and the cost
/// budget; ties go to the lower cost, then the lexicographically first.
pub fn exact_gap_cap(inst: &GapInstance) -> Result<Schedule> {
    inst.validate()?;
    let (m, n) = (inst.machines, inst.jobs);
    check_budget(m, n)?;
    let p = int_matrix("p", &inst.p)?;
    let c = int_matrix("c", &inst.c)?;
    let budget = to_int("cost budget", inst.cost_budget)?;
    let mut best: Option<(i64, i64, Vec<usize>)> = None;
    let mut loads = vec![0i64; m];
    let mut counts = vec![0u32; m];
    for_each_assignment(m, n, |a| {
        loads.iter_mut().for_each(|l| *l = 0);
        counts.iter_mut().for_each(|l| *l = 0);
        let mut cost = 0;
        for (j, &i) in a.iter().enumerate() {
            loads[i] += p[i][j];
            counts[i] += 1;
            cost += c[i][j];
        }
        if cost > budget || counts.iter().zip(&inst.b).any(|(k, b)| k > b) {
            return;
        }
        let span = loads.iter().copied().max().unwrap_or(0);
        if best.as_ref().map_or(true, |(s, k, _)| (span, cost) < (*s, *k)) {
            best = Some((span, cost, a.to_vec()));
        }
    });
    let (_, _, assign) = best.ok_or_else(|| Error::Infeasible("no assignment meets the capacities and cost budget".into()))?;
    let (loads, cost, counts) = inst.evaluate(&assign);
    Ok(Schedule {
        makespan: loads.iter().copied().fold(0.0, f64::max),
        assign,
        cost,
        loads,
        counts,
        iterations: 0,
        iteration_bound: 0,
    })
}

/// One non-dominated outcome: no other assignment has at least this profit,
/// at most this cost and at most this makespan with one strict inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrontierPoint {
    pub profit: i64,
    pub cost: i64,
    pub makespan: i64,
    /// A witness; `None` marks a dropped job.
    pub assign: Vec<Option<usize>>,
}

impl FrontierPoint {
    fn dominates(&self, o: &FrontierPoint) -> bool {
        self.profit >= o.profit
            && self.cost <= o.cost
            && self.makespan <= o.makespan
            && (self.profit, -self.cost, -self.makespan) != (o.profit, -o.cost, -o.makespan)
    }
}

fn outlier_outcomes(inst: &OutlierInstance, mut visit: impl FnMut(i64, i64, i64, &[usize])) -> Result<()> {
    inst.validate()?;
    let (m, n) = (inst.machines, inst.jobs);
    check_budget(m + 1, n)?;
    let p = int_matrix("p", &inst.p)?;
    let c = int_matrix("c", &inst.c)?;
    let pi: Vec<i64> = inst
        .profits
        .iter()
        .enumerate()
        .map(|(j, &v)| to_int(&format!("profit[{j}]"), v))
        .collect::<Result<_>>()?;
    let mut loads = vec![0i64; m];
    // digit m means the job is dropped
    for_each_assignment(m + 1, n, |a| {
        loads.iter_mut().for_each(|l| *l = 0);
        let (mut profit, mut cost) = (0, 0);
        for (j, &i) in a.iter().enumerate() {
            if i < m {
                loads[i] += p[i][j];
                cost += c[i][j];
                profit += pi[j];
            }
        }
        visit(profit, cost, loads.iter().copied().max().unwrap_or(0), a);
    });
    Ok(())
}

fn decode(a: &[usize], m: usize) -> Vec<Option<usize>> {
    a.iter().map(|&i| (i < m).then_some(i)).collect()
}

/// Pareto frontier of (profit, cost, makespan) over every way of scheduling
/// or dropping each job, restricted to makespan at most `t` when given.
/// Sorted by decreasing profit, then cost, then makespan.
pub fn exact_outlier(inst: &OutlierInstance, t: Option<f64>) -> Result<Vec<FrontierPoint>> {
    let limit = t.map(|v| v.floor() as i64);
    let mut front: Vec<FrontierPoint> = Vec::new();
    let m = inst.machines;
    outlier_outcomes(inst, |profit, cost, makespan, a| {
        if limit.is_some_and(|l| makespan > l) {
            return;
        }
        let cand = FrontierPoint { profit, cost, makespan, assign: Vec::new() };
        if front.iter().any(|f| f.dominates(&cand) || (f.profit, f.cost, f.makespan) == (profit, cost, makespan)) {
            return;
        }
        front.retain(|f| !cand.dominates(f));
        front.push(FrontierPoint { assign: decode(a, m), ..cand });
    })?;
    front.sort_by(|a, b| (b.profit, a.cost, a.makespan).cmp(&(a.profit, b.cost, b.makespan)));
    Ok(front)
}

/// Smallest makespan with profit at least the floor and cost within budget.
pub fn exact_outlier_min_makespan(inst: &OutlierInstance) -> Result<FrontierPoint> {
    let floor = to_int("profit floor", inst.profit_floor.ceil())?;
    let budget = to_int("cost budget", inst.cost_budget.floor())?;
    let mut best: Option<FrontierPoint> = None;
    let m = inst.machines;
    outlier_outcomes(inst, |profit, cost, makespan, a| {
        if profit < floor || cost > budget {
            return;
        }
        if best.as_ref().map_or(true, |b| (makespan, cost) < (b.makespan, b.cost)) {
            best = Some(FrontierPoint { profit, cost, makespan, assign: decode(a, m) });
        }
    })?;
    best.ok_or_else(|| Error::Infeasible("no schedule meets the profit floor within the cost budget".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactMaxMin {
    pub value: i64,
    pub allocation: Allocation,
}

/// Best achievable minimum utility. Goods may stay unallocated only when
/// caps are present.
pub fn exact_maxmin(inst: &MaxMinInstance) -> Result<ExactMaxMin> {
    inst.validate()?;
    let (k, m) = (inst.persons, inst.goods);
    let base = if inst.caps.is_some() { k + 1 } else { k };
    check_budget(base, m)?;
    let u = int_matrix("u", &inst.u)?;
    let caps: Option<Vec<usize>> = inst.caps.as_ref().map(|c| c.iter().map(|&v| v as usize).collect());
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut util = vec![0i64; k];
    let mut counts = vec![0usize; k];
    for_each_assignment(base, m, |a| {
        util.iter_mut().for_each(|v| *v = 0);
        counts.iter_mut().for_each(|v| *v = 0);
        for (j, &i) in a.iter().enumerate() {
            if i < k {
                util[i] += u[i][j];
                counts[i] += 1;
            }
        }
        if let Some(c) = &caps {
            if counts.iter().zip(c).any(|(n, c)| n > c) {
                return;
            }
        }
        let v = util.iter().copied().min().unwrap_or(0);
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, a.to_vec()));
        }
    });
    // the all-unallocated vector is always admissible under caps
    let (value, a) = best.ok_or_else(|| Error::Infeasible("no allocation exists".into()))?;
    let owner = a.iter().map(|&i| (i < k).then_some(i)).collect();
    Ok(ExactMaxMin { value, allocation: Allocation::from_owner(inst, owner) })
}
