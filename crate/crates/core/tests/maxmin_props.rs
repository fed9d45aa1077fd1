mod common;

use polyround::depround::BipartiteFractional;
use polyround::maxmin::{
    graph_utilities, maxmin_cap_round, maxmin_solve, resolve_contention, sample_matching, search_config_lp,
    solve_cap_assignment_lp, FlowMatchGraph, Params, DEFAULT_EPSILON,
};
use polyround::MaxMinInstance;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 10_000;

fn band() -> f64 {
    4.0 * (0.25 / N as f64).sqrt()
}

/// Two persons competing for three big goods, one good shared by both.
fn matching_fixture() -> FlowMatchGraph {
    let w = vec![vec![0.5, 0.3, 0.0], vec![0.0, 0.6, 0.2]];
    let matching = vec![vec![true, true, false], vec![false, true, true]];
    FlowMatchGraph {
        t: 10.0,
        lambda: 2.0,
        m_person: vec![0.8, 0.8],
        m_good: vec![0.5, 0.9, 0.2],
        w,
        matching,
    }
}

#[test]
fn matching_saturates_each_vertex_with_its_mass() {
    let g = matching_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut persons, mut goods) = (vec![0.0; 2], vec![0.0; 3]);
    for _ in 0..N {
        let m = sample_matching(&g, &mut rng);
        let mut seen = [false; 3];
        for (i, j) in m.iter().enumerate() {
            if let Some(j) = *j {
                assert!(g.matching[i][j], "person {i} matched along a non-matching edge");
                assert!(!seen[j], "good {j} matched twice");
                seen[j] = true;
                persons[i] += 1.0;
                goods[j] += 1.0;
            }
        }
    }
    for (i, s) in persons.iter().enumerate() {
        assert!((s / N as f64 - g.m_person[i]).abs() <= band(), "person {i}: {}", s / N as f64);
    }
    for (j, s) in goods.iter().enumerate() {
        assert!((s / N as f64 - g.m_good[j]).abs() <= band(), "good {j}: {}", s / N as f64);
    }
}

#[test]
fn contention_keeps_mean_utility_on_a_tree() {
    let inst = MaxMinInstance::new(
        vec![vec![4.0, 0.0, 0.0, 3.0], vec![2.0, 5.0, 0.0, 0.0], vec![0.0, 1.0, 6.0, 0.0]],
        None,
    )
    .unwrap();
    let mut g = BipartiteFractional::new(3, 4);
    for &(i, j, v) in &[(0, 0, 0.6), (1, 0, 0.4), (1, 1, 0.5), (2, 1, 0.5), (2, 2, 0.7), (0, 3, 0.8)] {
        g.insert(i, j, v).unwrap();
    }
    let want = graph_utilities(&inst, &g);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples: Vec<Vec<f64>> = (0..N)
        .map(|_| {
            let owner = resolve_contention(&inst, &g, &mut rng).unwrap();
            let mut got = vec![0.0; 3];
            for (j, o) in owner.iter().enumerate() {
                if let Some(i) = *o {
                    assert!(g.value(i, j) > 0.0, "good {j} went to non-claimant {i}");
                    got[i] += inst.u[i][j];
                }
            }
            got
        })
        .collect();
    for i in 0..3 {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / N as f64;
        let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
        let sigma = (var / N as f64).sqrt();
        assert!((mean - want[i]).abs() <= 4.0 * sigma + 1e-12, "person {i}: {mean} vs {}", want[i]);
    }
}

#[test]
fn config_lp_solutions_are_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..40 {
        let inst = common::random_maxmin(&mut rng, 3, 6, false);
        let params = Params::for_persons(inst.persons);
        if let Some(lp) = search_config_lp(&inst, params.lambda, DEFAULT_EPSILON).unwrap() {
            assert!(lp.max_violation(inst.goods) <= 1e-7);
            for (i, cs) in lp.configs.iter().enumerate() {
                for c in cs {
                    let value: f64 = c.goods.iter().map(|&j| inst.u[i][j]).sum();
                    let need = if c.big { lp.t / lp.lambda } else { lp.t };
                    assert!(value >= need - 1e-9, "person {i} bundle {c:?} worth {value} below {need}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn pipeline_allocates_each_good_once(seed in any::<u64>(), k in 2usize..=4, m in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_maxmin(&mut rng, k, m, false);
        let out = maxmin_solve(&inst, DEFAULT_EPSILON, &mut rng).unwrap();
        let a = &out.allocation;
        prop_assert_eq!(a.owner.len(), inst.goods);
        prop_assert_eq!(a.counts.iter().sum::<usize>(), a.owner.iter().flatten().count());
        for (i, matched) in out.matched.iter().enumerate() {
            if let Some(j) = *matched {
                prop_assert_eq!(a.owner[j], Some(i));
                prop_assert!(inst.u[i][j] >= out.t / out.params.lambda - 1e-9);
                prop_assert!(a.utilities[i] >= out.t / out.params.lambda - 1e-9);
            }
        }
        for (j, o) in a.owner.iter().enumerate() {
            if let Some(i) = *o {
                prop_assert!(out.matched[i] == Some(j) || out.claims[i].contains(&j));
            }
        }
    }

    #[test]
    fn capped_rounding_keeps_caps_and_near_targets(seed in any::<u64>(), k in 2usize..=4, m in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_maxmin(&mut rng, k, m, true);
        let (t, x) = solve_cap_assignment_lp(&inst).unwrap();
        for run in 0..10 {
            let mut r = ChaCha8Rng::seed_from_u64(run);
            let out = maxmin_cap_round(&inst, &x, &mut r).unwrap();
            prop_assert!(out.iterations <= out.iteration_bound);
            for i in 0..k {
                prop_assert!(out.allocation.counts[i] <= inst.caps.as_ref().unwrap()[i] as usize);
                let umax = inst.max_utility(i);
                prop_assert!(out.targets[i] >= t - 1e-6);
                if umax > 0.0 {
                    prop_assert!(out.allocation.utilities[i] > t - umax - 1e-6, "person {} got {} with t {}", i, out.allocation.utilities[i], t);
                }
            }
        }
    }
}
