use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use polyround::lpsolve::solve;
use polyround::{Constraint, LinearProgram, LpStatus, Relation, Sense, Tag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

#[derive(Clone, Debug)]
struct Row {
    a: Vec<i64>,
    rel: Relation,
    b: i64,
}

/// Solves the square system exactly; `None` when singular.
fn solve_exact(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = &a[r][c] / &a[c][c];
                for k in c..n {
                    let d = &f * &a[c][k];
                    a[r][k] -= d;
                }
                let d = &f * &b[c];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn satisfies(rows: &[Row], x: &[Q]) -> bool {
    let box_ok = x.iter().all(|v| !v.is_negative() && *v <= q(1));
    box_ok
        && rows.iter().all(|r| {
            let lhs: Q = r.a.iter().zip(x).map(|(&a, v)| q(a) * v).sum();
            match r.rel {
                Relation::Le => lhs <= q(r.b),
                Relation::Ge => lhs >= q(r.b),
                Relation::Eq => lhs == q(r.b),
            }
        })
}

/// Optimum over `0 <= x <= 1` by enumerating every basis of active faces.
fn vertex_oracle(n: usize, rows: &[Row], c: &[i64], sense: Sense) -> Option<Q> {
    // faces: rows, then x_v = 0, then x_v = 1
    let faces = rows.len() + 2 * n;
    let face = |f: usize| -> (Vec<Q>, Q) {
        if f < rows.len() {
            (rows[f].a.iter().map(|&v| q(v)).collect(), q(rows[f].b))
        } else {
            let v = (f - rows.len()) % n;
            let mut a = vec![q(0); n];
            a[v] = q(1);
            (a, if f - rows.len() < n { q(0) } else { q(1) })
        }
    };
    let mut best: Option<Q> = None;
    let mut pick = Vec::new();
    fn choose(
        start: usize,
        faces: usize,
        n: usize,
        pick: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() == n {
            visit(pick);
            return;
        }
        for f in start..faces {
            pick.push(f);
            choose(f + 1, faces, n, pick, visit);
            pick.pop();
        }
    }
    choose(0, faces, n, &mut pick, &mut |sel| {
        let (a, b): (Vec<_>, Vec<_>) = sel.iter().map(|&f| face(f)).unzip();
        let Some(x) = solve_exact(a, b) else { return };
        if !satisfies(rows, &x) {
            return;
        }
        let val: Q = c.iter().zip(&x).map(|(&ci, v)| q(ci) * v).sum();
        let better = match (&best, sense) {
            (None, _) => true,
            (Some(b), Sense::Minimize) => val < *b,
            (Some(b), Sense::Maximize) => val > *b,
        };
        if better {
            best = Some(val);
        }
    });
    best
}

fn build(n: usize, rows: &[Row], c: &[i64], sense: Sense) -> LinearProgram {
    let mut lp = LinearProgram::new(n, sense);
    for v in 0..n {
        lp.set_bounds(v, 0.0, 1.0);
        lp.objective[v] = c[v] as f64;
    }
    for r in rows {
        let coeffs = r.a.iter().enumerate().filter(|(_, &a)| a != 0).map(|(v, &a)| (v, a as f64)).collect();
        lp.add(Constraint::new(coeffs, r.rel, r.b as f64, Tag::Load));
    }
    lp
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)]
}

fn lp_case() -> impl Strategy<Value = (usize, Vec<Row>, Vec<i64>, bool)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        let row = (prop::collection::vec(-3i64..=3, n), relation(), -2i64..=6).prop_map(|(a, rel, b)| Row { a, rel, b });
        (Just(n), prop::collection::vec(row, m), prop::collection::vec(-5i64..=5, n), any::<bool>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn simplex_matches_vertex_enumeration((n, rows, c, maximize) in lp_case()) {
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        let lp = build(n, &rows, &c, sense);
        let sol = solve(&lp).unwrap();
        match vertex_oracle(n, &rows, &c, sense) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!(lp.max_violation(&sol.values) <= 1e-7);
                let exact = best.to_f64().unwrap();
                prop_assert!((sol.objective_value - exact).abs() <= 1e-7, "{} vs {}", sol.objective_value, exact);
            }
        }
    }
}

/// `min c·x` over `A x >= b`, `0 <= x <= 1`: every `y >= 0` gives the lower
/// bound `b·y - sum_v max(0, (Aᵀy)_v - c_v)`.
#[test]
fn primal_objective_dominates_random_dual_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..300 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=5);
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..=4) as f64).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0..=4) as f64).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=6) as f64).collect();
        let mut lp = LinearProgram::new(n, Sense::Minimize);
        lp.objective = c.clone();
        for v in 0..n {
            lp.set_bounds(v, 0.0, 1.0);
        }
        for i in 0..m {
            lp.add(Constraint::ge((0..n).map(|v| (v, a[i][v])).collect(), b[i], Tag::Load));
        }
        let sol = solve(&lp).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        checked += 1;
        for _ in 0..50 {
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
            let by: f64 = b.iter().zip(&y).map(|(b, y)| b * y).sum();
            let penalty: f64 = (0..n)
                .map(|v| ((0..m).map(|i| a[i][v] * y[i]).sum::<f64>() - c[v]).max(0.0))
                .sum();
            assert!(sol.objective_value >= by - penalty - 1e-7);
        }
    }
    assert!(checked > 100, "only {checked} feasible programs");
}

#[test]
fn degenerate_assignment_program_terminates() {
    // every basis of the 4x4 assignment polytope is highly degenerate
    let n = 4;
    let mut lp = LinearProgram::new(n * n, Sense::Minimize);
    for i in 0..n {
        lp.add(Constraint::eq((0..n).map(|j| (i * n + j, 1.0)).collect(), 1.0, Tag::Assign));
        lp.add(Constraint::eq((0..n).map(|j| (j * n + i, 1.0)).collect(), 1.0, Tag::Assign));
    }
    for v in 0..n * n {
        lp.objective[v] = ((v * 7) % 5) as f64;
        lp.set_bounds(v, 0.0, 1.0);
    }
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(lp.max_violation(&sol.values) <= 1e-9);
}
