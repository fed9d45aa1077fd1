//! Iterated randomized moves over a machine/job assignment polytope with
//! per-machine load and capacity rows, shared by the capacitated GAP rounding
//! and the capacitated max-min rounding.
//!
//! Each iteration classifies machines by their number `k` of floating edges
//! and prunes their rows before moving:
//!
//! * `k = 1`: load and capacity rows are dropped;
//! * `k = 2`: the load row is dropped and the capacity row is replaced, once,
//!   by `x1 + x2 <= ceil(x1 + x2)` (plus `>= floor(x1 + x2)` for lower-bound
//!   load rows);
//! * `k = 3` with both load and capacity tight: the load row is dropped.
//!
//! Dropped rows never come back. With these rules the current point is never
//! a vertex of the reduced system, so a stall is reported as an invariant
//! violation together with the machine degree profile.

use crate::error::{Error, Result};
use crate::polytope::{rand_move_branches, Constraint, MoveBranches, Point, Polytope, Relation, Tag};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub machine: usize,
    pub job: usize,
    /// Coefficient in the machine's load row.
    pub weight: f64,
}

pub(crate) struct CapWalk<'a> {
    pub edges: &'a [Edge],
    pub machines: usize,
    pub jobs: usize,
    pub load_rhs: Vec<f64>,
    /// `Le` for makespan rows, `Ge` for utility floors.
    pub load_relation: Relation,
    pub caps: Vec<Option<f64>>,
    /// A machine without rows that absorbs slack in the job rows.
    pub sink: Option<usize>,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct WalkOutcome {
    pub x: Point,
    pub iterations: usize,
    pub bound: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct MachineState {
    load_dropped: bool,
    cap_dropped: bool,
    rewrite: Option<Rewrite>,
}

#[derive(Clone, Copy, Debug)]
struct Rewrite {
    e1: usize,
    e2: usize,
    ceil: f64,
    floor: f64,
}

impl CapWalk<'_> {
    fn floating(&self, x: &[f64], e: usize) -> bool {
        x[e] > self.tol && x[e] < 1.0 - self.tol
    }

    fn load_row(&self, i: usize) -> Option<Constraint> {
        let coeffs: Vec<(usize, f64)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.machine == i && e.weight != 0.0)
            .map(|(k, e)| (k, e.weight))
            .collect();
        (!coeffs.is_empty()).then(|| Constraint::new(coeffs, self.load_relation, self.load_rhs[i], Tag::Load))
    }

    fn cap_row(&self, i: usize) -> Option<Constraint> {
        let b = self.caps[i]?;
        let coeffs: Vec<(usize, f64)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.machine == i)
            .map(|(k, _)| (k, 1.0))
            .collect();
        (!coeffs.is_empty()).then(|| Constraint::le(coeffs, b, Tag::Capacity))
    }

    fn job_rows(&self) -> Vec<Constraint> {
        let mut by_job: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.jobs];
        for (k, e) in self.edges.iter().enumerate() {
            by_job[e.job].push((k, 1.0));
        }
        by_job
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|c| Constraint::eq(c, 1.0, Tag::Assign))
            .collect()
    }

    fn machine_rows(&self, i: usize, st: &MachineState) -> Vec<Constraint> {
        let mut rows = Vec::new();
        if !st.load_dropped {
            rows.extend(self.load_row(i));
        }
        if let Some(r) = st.rewrite {
            let pair = vec![(r.e1, 1.0), (r.e2, 1.0)];
            rows.push(Constraint::le(pair.clone(), r.ceil, Tag::Capacity));
            if self.load_relation == Relation::Ge {
                rows.push(Constraint::ge(pair, r.floor, Tag::Capacity));
            }
        } else if !st.cap_dropped {
            rows.extend(self.cap_row(i));
        }
        rows
    }

    fn initial_row_count(&self) -> usize {
        let machine_rows: usize = (0..self.machines)
            .filter(|&i| Some(i) != self.sink)
            .map(|i| self.load_row(i).is_some() as usize + self.cap_row(i).is_some() as usize)
            .sum();
        self.job_rows().len() + machine_rows
    }

    /// Walks from `x0` to an integral point. `pick` returns `true` to take the
    /// `plus` end point of a move.
    pub fn run(&self, x0: &[f64], mut pick: impl FnMut(&MoveBranches) -> bool) -> Result<WalkOutcome> {
        let n = self.edges.len();
        if x0.len() != n {
            return Err(Error::InvalidInput(format!("point has {} entries, expected {n}", x0.len())));
        }
        let bound = self.initial_row_count() + n;
        let job_rows = self.job_rows();
        let mut state = vec![MachineState::default(); self.machines];
        let mut x = Point(x0.to_vec());
        for v in x.iter_mut() {
            if *v <= self.tol {
                *v = 0.0;
            } else if *v >= 1.0 - self.tol {
                *v = 1.0;
            }
        }
        let mut iterations = 0;
        loop {
            let mut float_of: Vec<Vec<usize>> = vec![Vec::new(); self.machines];
            for (k, e) in self.edges.iter().enumerate() {
                if self.floating(&x, k) {
                    float_of[e.machine].push(k);
                }
            }
            if float_of.iter().all(Vec::is_empty) {
                break;
            }
            for i in 0..self.machines {
                if Some(i) == self.sink {
                    continue;
                }
                self.apply_drop_rules(i, &float_of[i], &x, &mut state[i]);
            }
            let mut rows = job_rows.clone();
            for (i, st) in state.iter().enumerate() {
                if Some(i) != self.sink {
                    rows.extend(self.machine_rows(i, st));
                }
            }
            let poly = Polytope::new(n, rows)?;
            let branches = match rand_move_branches(&poly, &x, self.tol) {
                Ok(b) => b,
                Err(Error::AtVertex) | Err(Error::DegenerateDirection) => {
                    return Err(Error::InvariantViolation(self.stall_report(&float_of, &state, &x)));
                }
                Err(e) => return Err(e),
            };
            x = if pick(&branches) { branches.plus } else { branches.minus };
            iterations += 1;
            if iterations > bound {
                return Err(Error::InvariantViolation(format!(
                    "walk exceeded {bound} iterations without settling"
                )));
            }
        }
        Ok(WalkOutcome { x, iterations, bound })
    }

    fn apply_drop_rules(&self, i: usize, floating: &[usize], x: &[f64], st: &mut MachineState) {
        match floating.len() {
            1 => {
                st.load_dropped = true;
                st.cap_dropped = true;
                st.rewrite = None;
            }
            2 if !st.cap_dropped && st.rewrite.is_none() => {
                let s = x[floating[0]] + x[floating[1]];
                st.load_dropped = true;
                st.rewrite = Some(Rewrite {
                    e1: floating[0],
                    e2: floating[1],
                    ceil: (s - self.tol).ceil(),
                    floor: (s + self.tol).floor(),
                });
            }
            3 if !st.load_dropped && !st.cap_dropped => {
                let load_tight = self.load_row(i).is_some_and(|r| r.is_tight(x, self.tol));
                let cap_tight = self.cap_row(i).is_some_and(|r| r.is_tight(x, self.tol));
                if load_tight && cap_tight {
                    st.load_dropped = true;
                }
            }
            _ => {}
        }
    }

    fn stall_report(&self, float_of: &[Vec<usize>], state: &[MachineState], x: &[f64]) -> String {
        let mut m = [0usize; 6];
        let mut caps_tight = true;
        for (i, f) in float_of.iter().enumerate() {
            if Some(i) == self.sink || f.is_empty() {
                continue;
            }
            m[f.len().min(5)] += 1;
            let st = &state[i];
            let tight = match st.rewrite {
                Some(r) => (x[r.e1] + x[r.e2] - r.ceil).abs() <= 2.0 * self.tol,
                None if st.cap_dropped => false,
                None => self.cap_row(i).is_some_and(|r| r.is_tight(x, self.tol)),
            };
            caps_tight &= tight;
        }
        let floating: usize = float_of.iter().map(Vec::len).sum();
        format!(
            "walk stalled at a vertex: m1={} m2={} m3={} m4={} m5+={} all_caps_tight={} floating={} \
             (a vertex requires m1=m3=m5+=0 and all caps tight)",
            m[1], m[2], m[3], m[4], m[5], caps_tight, floating
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_edges(m: usize, n: usize) -> Vec<Edge> {
        (0..m)
            .flat_map(|i| (0..n).map(move |j| Edge { machine: i, job: j, weight: 1.0 }))
            .collect()
    }

    #[test]
    fn integral_start_takes_no_steps() {
        let edges = unit_edges(2, 2);
        let w = CapWalk {
            edges: &edges,
            machines: 2,
            jobs: 2,
            load_rhs: vec![1.0, 1.0],
            load_relation: Relation::Le,
            caps: vec![Some(1.0), Some(1.0)],
            sink: None,
            tol: 1e-7,
        };
        let out = w.run(&[1.0, 0.0, 0.0, 1.0], |_| true).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x.0, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn half_assignment_becomes_a_permutation() {
        let edges = unit_edges(2, 2);
        let w = CapWalk {
            edges: &edges,
            machines: 2,
            jobs: 2,
            load_rhs: vec![1.0, 1.0],
            load_relation: Relation::Le,
            caps: vec![Some(1.0), Some(1.0)],
            sink: None,
            tol: 1e-7,
        };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = w.run(&[0.5; 4], |b| rng.gen::<f64>() < b.prob_plus()).unwrap();
            assert!(out.x.is_integral());
            assert_eq!(out.x[0] + out.x[1], 1.0);
            assert_eq!(out.x[0] + out.x[2], 1.0);
            assert!(out.iterations <= out.bound);
        }
    }

    #[test]
    fn sink_absorbs_unallocated_goods() {
        // person 0 with cap 1 and two goods at 0.5; person 1 is the sink.
        let edges = vec![
            Edge { machine: 0, job: 0, weight: 4.0 },
            Edge { machine: 0, job: 1, weight: 4.0 },
            Edge { machine: 1, job: 0, weight: 0.0 },
            Edge { machine: 1, job: 1, weight: 0.0 },
        ];
        let w = CapWalk {
            edges: &edges,
            machines: 2,
            jobs: 2,
            load_rhs: vec![4.0, 0.0],
            load_relation: Relation::Ge,
            caps: vec![Some(1.0), None],
            sink: Some(1),
            tol: 1e-7,
        };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = w.run(&[0.5; 4], |b| rng.gen::<f64>() < b.prob_plus()).unwrap();
            assert_eq!(out.x[0] + out.x[1], 1.0);
        }
    }
}
