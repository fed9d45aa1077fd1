//! Live constraint systems over `[0,1]`-boxed variables and the randomized
//! move that walks a point toward a vertex.
//!
//! A [`Polytope`] is a list of linear rows over variables `0..num_vars`; every
//! variable is additionally confined to `[0, 1]`. Given a non-vertex point
//! `x`, [`rand_move`] picks a direction `r` in the nullspace of the rows that
//! are tight at `x` (restricted to the variables strictly inside the box),
//! measures how far it can travel along `r` and `-r`, and jumps to one of the
//! two end points with the probabilities that keep `E[Y] = x`.

use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Echelon, Matrix, DEFAULT_RANK_TOL};

/// Absolute tightness tolerance used by the rounding algorithms.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Smallest step accepted as positive travel along a direction.
const MIN_STEP: f64 = 1e-12;

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Origin of a constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Assign,
    Load,
    Capacity,
    Cost,
    Profit,
    BundleProfit,
    Box,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: Tag,
}

impl Constraint {
    pub fn new(coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64, tag: Tag) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
            tag,
        }
    }

    pub fn le(coeffs: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> Self {
        Self::new(coeffs, Relation::Le, rhs, tag)
    }

    pub fn eq(coeffs: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> Self {
        Self::new(coeffs, Relation::Eq, rhs, tag)
    }

    pub fn ge(coeffs: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> Self {
        Self::new(coeffs, Relation::Ge, rhs, tag)
    }

    /// Row value `a·x`.
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Signed distance to violation: non-negative iff satisfied. Equality rows
    /// report `-|a·x - b|`.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let ax = self.lhs(x);
        match self.relation {
            Relation::Le => self.rhs - ax,
            Relation::Ge => ax - self.rhs,
            Relation::Eq => -(ax - self.rhs).abs(),
        }
    }

    /// Tolerance scaled by the row's absolute coefficient mass, so that rows
    /// with large coefficients absorb the snapping of their variables.
    pub fn scaled_tol(&self, tol: f64) -> f64 {
        let mass: f64 = self.coeffs.iter().map(|(_, a)| a.abs()).sum();
        tol * mass.max(1.0)
    }

    pub fn is_tight(&self, x: &[f64], tol: f64) -> bool {
        self.slack(x).abs() <= self.scaled_tol(tol)
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        if !self.rhs.is_finite() {
            return Err(Error::InvalidInput(format!("{:?} row has non-finite rhs", self.tag)));
        }
        for &(v, a) in &self.coeffs {
            if v >= num_vars {
                return Err(Error::InvalidInput(format!(
                    "{:?} row references variable {v} of {num_vars}",
                    self.tag
                )));
            }
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{:?} row has non-finite coefficient on variable {v}",
                    self.tag
                )));
            }
        }
        Ok(())
    }
}

/// Values of every variable of a polytope.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// True when every coordinate is exactly 0 or 1.
    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Polytope {
    num_vars: usize,
    constraints: Vec<Constraint>,
}

impl Polytope {
    pub fn new(num_vars: usize, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            if c.coeffs.is_empty() {
                return Err(Error::InvalidInput(format!("{:?} row has no coefficients", c.tag)));
            }
            c.validate(num_vars)?;
        }
        Ok(Self {
            num_vars,
            constraints,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn check_point(&self, x: &[f64], tol: f64) -> Result<()> {
        if x.len() != self.num_vars {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, polytope has {} variables",
                x.len(),
                self.num_vars
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        for (v, &xv) in x.iter().enumerate() {
            if !xv.is_finite() || xv < -tol || xv > 1.0 + tol {
                return Err(Error::InfeasiblePoint(format!("x[{v}] = {xv} outside [0,1]")));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let s = c.slack(x);
            if s < -c.scaled_tol(tol) {
                return Err(Error::InfeasiblePoint(format!(
                    "row {k} ({:?} {} {}) violated by {}",
                    c.tag, c.relation, c.rhs, -s
                )));
            }
        }
        Ok(())
    }

    fn floating(&self, x: &[f64], tol: f64) -> Vec<VarId> {
        (0..self.num_vars)
            .filter(|&v| x[v] > tol && x[v] < 1.0 - tol)
            .collect()
    }

    fn tight_rows(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.relation == Relation::Eq || c.is_tight(x, tol))
            .map(|(k, _)| k)
            .collect()
    }

    /// Tight rows restricted to the floating columns.
    fn tight_matrix(&self, rows: &[usize], floating: &[VarId]) -> Matrix {
        let mut col_of = vec![usize::MAX; self.num_vars];
        for (k, &v) in floating.iter().enumerate() {
            col_of[v] = k;
        }
        let mut m = Matrix::zeros(rows.len(), floating.len());
        for (r, &k) in rows.iter().enumerate() {
            for &(v, a) in &self.constraints[k].coeffs {
                let c = col_of[v];
                if c != usize::MAX {
                    m.set(r, c, m.get(r, c) + a);
                }
            }
        }
        m
    }

    /// Largest `t ≥ 0` with `x + t·d` inside the polytope, where `d` is zero
    /// outside `floating` and orthogonal to the tight rows. Returns the step
    /// and the variable that hits the box first, if a box face binds.
    fn max_step(&self, x: &[f64], d: &[f64], floating: &[VarId], tight: &[bool]) -> (f64, Option<(VarId, f64)>) {
        let mut t = f64::INFINITY;
        let mut binding = None;
        for &v in floating {
            let dv = d[v];
            let (limit, target) = if dv > 0.0 {
                ((1.0 - x[v]) / dv, 1.0)
            } else if dv < 0.0 {
                (x[v] / -dv, 0.0)
            } else {
                continue;
            };
            if limit < t {
                t = limit;
                binding = Some((v, target));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if tight[k] {
                continue;
            }
            let ad = c.lhs(d);
            let scale = c.coeffs.iter().fold(0.0f64, |m, (_, a)| m.max(a.abs()));
            if ad.abs() <= 1e-12 * scale {
                continue;
            }
            let limit = match c.relation {
                Relation::Le if ad > 0.0 => (c.rhs - c.lhs(x)) / ad,
                Relation::Ge if ad < 0.0 => (c.lhs(x) - c.rhs) / -ad,
                _ => continue,
            };
            if limit < t {
                t = limit.max(0.0);
                binding = None;
            }
        }
        (t, binding)
    }
}

/// Constraints satisfied with equality at a point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TightSet {
    /// Indices into [`Polytope::constraints`].
    pub rows: Vec<usize>,
    /// Variables sitting on their lower box face.
    pub at_zero: Vec<VarId>,
    /// Variables sitting on their upper box face.
    pub at_one: Vec<VarId>,
}

impl TightSet {
    pub fn len(&self) -> usize {
        self.rows.len() + self.at_zero.len() + self.at_one.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when every member of `other` is also a member of `self`.
    pub fn contains_all(&self, other: &TightSet) -> bool {
        other.rows.iter().all(|r| self.rows.contains(r))
            && other.at_zero.iter().all(|v| self.at_zero.contains(v))
            && other.at_one.iter().all(|v| self.at_one.contains(v))
    }

    /// Materialises the tight set as constraints; box faces carry [`Tag::Box`].
    pub fn constraints(&self, p: &Polytope) -> Vec<Constraint> {
        let mut out: Vec<Constraint> = self.rows.iter().map(|&k| p.constraints[k].clone()).collect();
        out.extend(self.at_zero.iter().map(|&v| Constraint::ge(vec![(v, 1.0)], 0.0, Tag::Box)));
        out.extend(self.at_one.iter().map(|&v| Constraint::le(vec![(v, 1.0)], 1.0, Tag::Box)));
        out
    }
}

pub fn tight_set(p: &Polytope, x: &[f64], tol: f64) -> Result<TightSet> {
    p.check_point(x, tol)?;
    let mut ts = TightSet {
        rows: p.tight_rows(x, tol),
        ..TightSet::default()
    };
    for (v, &xv) in x.iter().enumerate() {
        if xv <= tol {
            ts.at_zero.push(v);
        } else if xv >= 1.0 - tol {
            ts.at_one.push(v);
        }
    }
    Ok(ts)
}

/// True iff the tight rows, restricted to the floating variables, have full
/// column rank (no direction keeps them all tight).
pub fn is_vertex(p: &Polytope, x: &[f64], tol: f64) -> Result<bool> {
    p.check_point(x, tol)?;
    let floating = p.floating(x, tol);
    if floating.is_empty() {
        return Ok(true);
    }
    let rows = p.tight_rows(x, tol);
    let m = p.tight_matrix(&rows, &floating);
    Ok(Echelon::compute(&m, DEFAULT_RANK_TOL)?.rank() == floating.len())
}

/// Both end points of one randomized move, before the coin is tossed.
#[derive(Clone, Debug)]
pub struct MoveBranches {
    pub direction: Vec<f64>,
    /// Travel along `+direction`.
    pub step_plus: f64,
    /// Travel along `-direction`.
    pub step_minus: f64,
    pub plus: Point,
    pub minus: Point,
}

impl MoveBranches {
    /// Probability of taking the `plus` end point; keeps `E[Y] = x`.
    pub fn prob_plus(&self) -> f64 {
        self.step_minus / (self.step_plus + self.step_minus)
    }

    pub fn choose<R: Rng + ?Sized>(self, rng: &mut R) -> Point {
        if rng.gen::<f64>() < self.prob_plus() {
            self.plus
        } else {
            self.minus
        }
    }
}

fn apply_step(x: &[f64], d: &[f64], t: f64, binding: Option<(VarId, f64)>, tol: f64) -> Point {
    let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
    if let Some((v, target)) = binding {
        y[v] = target;
    }
    for v in y.iter_mut() {
        if *v <= tol {
            *v = 0.0;
        } else if *v >= 1.0 - tol {
            *v = 1.0;
        }
    }
    Point(y)
}

/// Computes the two candidate end points of a randomized move from `x`.
///
/// Directions are tried in free-column order of the reduced tight system;
/// the first one with positive travel both ways is used.
pub fn rand_move_branches(p: &Polytope, x: &[f64], tol: f64) -> Result<MoveBranches> {
    p.check_point(x, tol)?;
    let floating = p.floating(x, tol);
    if floating.is_empty() {
        return Err(Error::AtVertex);
    }
    let rows = p.tight_rows(x, tol);
    let mut tight = vec![false; p.constraints.len()];
    for &k in &rows {
        tight[k] = true;
    }
    let ech = Echelon::compute(&p.tight_matrix(&rows, &floating), DEFAULT_RANK_TOL)?;
    if ech.free_columns().is_empty() {
        return Err(Error::AtVertex);
    }
    for &f in ech.free_columns() {
        let local = ech.null_vector_for(f);
        let mut d = vec![0.0; p.num_vars];
        for (k, &v) in floating.iter().enumerate() {
            d[v] = local[k];
        }
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let (t_plus, b_plus) = p.max_step(x, &d, &floating, &tight);
        let (t_minus, b_minus) = p.max_step(x, &neg, &floating, &tight);
        if t_plus > MIN_STEP && t_minus > MIN_STEP && t_plus.is_finite() && t_minus.is_finite() {
            return Ok(MoveBranches {
                plus: apply_step(x, &d, t_plus, b_plus, tol),
                minus: apply_step(x, &neg, t_minus, b_minus, tol),
                direction: d,
                step_plus: t_plus,
                step_minus: t_minus,
            });
        }
    }
    Err(Error::DegenerateDirection)
}

/// One randomized move: `x + f(r) r` with probability `f(-r)/(f(r)+f(-r))`,
/// otherwise `x - f(-r) r`.
pub fn rand_move<R: Rng + ?Sized>(p: &Polytope, x: &[f64], rng: &mut R, tol: f64) -> Result<Point> {
    Ok(rand_move_branches(p, x, tol)?.choose(rng))
}
