//! Bipartite dependent rounding.
//!
//! Each step picks an even cycle or a maximal path among the fractional
//! edges, splits it into the two alternating matchings `M1` / `M2`, and
//! shifts mass between them until some edge reaches 0 or 1. The two shifts
//! are weighted so every edge keeps its expectation, and interior vertices of
//! the path or cycle keep their fractional degree exactly.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Values closer than this to 0 or 1 are treated as settled.
pub const SNAP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteFractional {
    left: usize,
    right: usize,
    edges: BTreeMap<(usize, usize), f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Left(usize),
    Right(usize),
}

/// An even cycle or a maximal path of fractional edges, listed in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    /// `v0, v1, …`; for a cycle the closing vertex is not repeated.
    pub nodes: Vec<Node>,
    /// `edges[t]` joins `nodes[t]` and `nodes[t + 1]` (cyclically for cycles),
    /// stored as `(left, right)`.
    pub edges: Vec<(usize, usize)>,
    pub closed: bool,
}

fn is_fractional(x: f64) -> bool {
    x > SNAP_TOL && x < 1.0 - SNAP_TOL
}

impl BipartiteFractional {
    pub fn new(left: usize, right: usize) -> Self {
        Self {
            left,
            right,
            edges: BTreeMap::new(),
        }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn insert(&mut self, u: usize, v: usize, x: f64) -> Result<()> {
        if u >= self.left || v >= self.right {
            return Err(Error::InvalidInput(format!(
                "edge ({u},{v}) outside {}x{} graph",
                self.left, self.right
            )));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidInput(format!("edge ({u},{v}) has value {x} outside [0,1]")));
        }
        self.edges.insert((u, v), x);
        Ok(())
    }

    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.edges.get(&(u, v)).copied().unwrap_or(0.0)
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().map(|(&k, &x)| (k, x))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_integral(&self) -> bool {
        self.edges.values().all(|&x| x == 0.0 || x == 1.0)
    }

    pub fn has_fractional(&self) -> bool {
        self.edges.values().any(|&x| is_fractional(x))
    }

    /// Sum of edge values at a vertex.
    pub fn degree(&self, node: Node) -> f64 {
        self.edges
            .iter()
            .filter(|(&(u, v), _)| match node {
                Node::Left(a) => a == u,
                Node::Right(b) => b == v,
            })
            .map(|(_, &x)| x)
            .sum()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.left + self.right];
        for (&(u, v), &x) in &self.edges {
            if is_fractional(x) {
                adj[u].push(self.left + v);
                adj[self.left + v].push(u);
            }
        }
        adj
    }

    fn node(&self, key: usize) -> Node {
        if key < self.left {
            Node::Left(key)
        } else {
            Node::Right(key - self.left)
        }
    }

    fn edge_key(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.left {
            (a, b - self.left)
        } else {
            (b, a - self.left)
        }
    }

    /// Cycle or maximal path through the fractional edges, found by a
    /// depth-first walk from the lowest-numbered vertex with a fractional
    /// edge. Deterministic for a given graph.
    pub fn find_walk(&self) -> Option<Walk> {
        let adj = self.adjacency();
        let start = (0..adj.len()).find(|&k| !adj[k].is_empty())?;
        match walk_from(start, &adj) {
            Search::Cycle(nodes) => Some(self.to_walk(nodes, true)),
            Search::Stuck(path) => {
                let leaf = *path.last().unwrap();
                match walk_from(leaf, &adj) {
                    Search::Cycle(nodes) => Some(self.to_walk(nodes, true)),
                    Search::Stuck(path) => Some(self.to_walk(path, false)),
                }
            }
        }
    }

    fn to_walk(&self, keys: Vec<usize>, closed: bool) -> Walk {
        let mut edges: Vec<(usize, usize)> = keys.windows(2).map(|w| self.edge_key(w[0], w[1])).collect();
        if closed {
            edges.push(self.edge_key(*keys.last().unwrap(), keys[0]));
        }
        Walk {
            nodes: keys.into_iter().map(|k| self.node(k)).collect(),
            edges,
            closed,
        }
    }
}

enum Search {
    Cycle(Vec<usize>),
    Stuck(Vec<usize>),
}

fn walk_from(start: usize, adj: &[Vec<usize>]) -> Search {
    let mut path = vec![start];
    let mut pos = vec![usize::MAX; adj.len()];
    pos[start] = 0;
    loop {
        let cur = *path.last().unwrap();
        let prev = if path.len() >= 2 { Some(path[path.len() - 2]) } else { None };
        if let Some(&w) = adj[cur].iter().find(|&&w| pos[w] != usize::MAX && Some(w) != prev) {
            return Search::Cycle(path[pos[w]..].to_vec());
        }
        match adj[cur].iter().find(|&&w| pos[w] == usize::MAX) {
            Some(&w) => {
                pos[w] = path.len();
                path.push(w);
            }
            None => return Search::Stuck(path),
        }
    }
}

/// Both outcomes of one rounding step.
#[derive(Clone, Debug)]
pub struct StepBranches {
    /// `M1 += α`, `M2 -= α`.
    pub plus: BipartiteFractional,
    /// `M1 -= β`, `M2 += β`.
    pub minus: BipartiteFractional,
    pub alpha: f64,
    pub beta: f64,
    pub walk: Walk,
}

impl StepBranches {
    pub fn prob_plus(&self) -> f64 {
        self.beta / (self.alpha + self.beta)
    }
}

fn shifted(g: &BipartiteFractional, walk: &Walk, delta: f64) -> BipartiteFractional {
    let mut out = g.clone();
    for (t, e) in walk.edges.iter().enumerate() {
        let x = out.edges.get_mut(e).unwrap();
        let v = if t % 2 == 0 { *x + delta } else { *x - delta };
        *x = if v <= SNAP_TOL {
            0.0
        } else if v >= 1.0 - SNAP_TOL {
            1.0
        } else {
            v
        };
    }
    out
}

pub fn round_step_branches(g: &BipartiteFractional) -> Result<StepBranches> {
    let walk = g.find_walk().ok_or(Error::NothingToRound)?;
    let mut alpha = f64::INFINITY;
    let mut beta = f64::INFINITY;
    for (t, e) in walk.edges.iter().enumerate() {
        let x = g.edges[e];
        if t % 2 == 0 {
            alpha = alpha.min(1.0 - x);
            beta = beta.min(x);
        } else {
            alpha = alpha.min(x);
            beta = beta.min(1.0 - x);
        }
    }
    Ok(StepBranches {
        plus: shifted(g, &walk, alpha),
        minus: shifted(g, &walk, -beta),
        alpha,
        beta,
        walk,
    })
}

/// One dependent-rounding step: with probability `β/(α+β)` move `M1` up by
/// `α`, otherwise move it down by `β`.
pub fn round_step<R: Rng + ?Sized>(g: &BipartiteFractional, rng: &mut R) -> Result<BipartiteFractional> {
    let b = round_step_branches(g)?;
    Ok(if rng.gen::<f64>() < b.prob_plus() { b.plus } else { b.minus })
}

/// Rounds every edge to 0 or 1.
pub fn round_all<R: Rng + ?Sized>(g: &BipartiteFractional, rng: &mut R) -> BipartiteFractional {
    let mut cur = g.clone();
    while cur.has_fractional() {
        cur = round_step(&cur, rng).expect("fractional edge present");
    }
    for x in cur.edges.values_mut() {
        *x = x.round();
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(left: usize, right: usize, es: &[(usize, usize, f64)]) -> BipartiteFractional {
        let mut g = BipartiteFractional::new(left, right);
        for &(u, v, x) in es {
            g.insert(u, v, x).unwrap();
        }
        g
    }

    #[test]
    fn single_edge_is_a_fair_coin() {
        let g = graph(1, 1, &[(0, 0, 0.5)]);
        let b = round_step_branches(&g).unwrap();
        assert!((b.prob_plus() - 0.5).abs() < 1e-15);
        let mut outs = [b.plus.value(0, 0), b.minus.value(0, 0)];
        outs.sort_by(f64::total_cmp);
        assert_eq!(outs, [0.0, 1.0]);
    }

    #[test]
    fn four_cycle_picks_a_perfect_matching() {
        let g = graph(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]);
        let b = round_step_branches(&g).unwrap();
        assert!(b.walk.closed);
        assert!((b.prob_plus() - 0.5).abs() < 1e-15);
        for out in [&b.plus, &b.minus] {
            assert!(out.is_integral());
            for k in 0..2 {
                assert_eq!(out.degree(Node::Left(k)), 1.0);
                assert_eq!(out.degree(Node::Right(k)), 1.0);
            }
        }
        assert_ne!(b.plus, b.minus);
    }

    #[test]
    fn star_center_rounds_complementarily() {
        let g = graph(1, 2, &[(0, 0, 0.3), (0, 1, 0.7)]);
        let b = round_step_branches(&g).unwrap();
        for out in [&b.plus, &b.minus] {
            assert!(out.is_integral());
            assert_eq!(out.degree(Node::Left(0)), 1.0);
        }
    }

    #[test]
    fn nothing_to_round() {
        let g = graph(1, 1, &[(0, 0, 1.0)]);
        assert_eq!(round_step_branches(&g).unwrap_err(), Error::NothingToRound);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(round_all(&g, &mut rng), g);
    }

    #[test]
    fn shared_right_vertex_gets_exactly_one() {
        let g = graph(2, 1, &[(0, 0, 0.5), (1, 0, 0.5)]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = round_all(&g, &mut rng);
            assert_eq!(out.degree(Node::Right(0)), 1.0);
        }
    }

    #[test]
    fn complete_two_by_two_keeps_unit_degrees() {
        let g = graph(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = round_all(&g, &mut rng);
            for k in 0..2 {
                assert_eq!(out.degree(Node::Left(k)), 1.0);
                assert_eq!(out.degree(Node::Right(k)), 1.0);
            }
        }
    }

    #[test]
    fn path_is_maximal() {
        // 0L - 0R - 1L - 1R, extended from the middle.
        let g = graph(2, 2, &[(0, 0, 0.4), (1, 0, 0.3), (1, 1, 0.6)]);
        let w = g.find_walk().unwrap();
        assert!(!w.closed);
        assert_eq!(w.edges.len(), 3);
    }
}
