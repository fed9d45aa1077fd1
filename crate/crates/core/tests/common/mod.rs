#![allow(dead_code)]

use polyround::{GapInstance, MaxMinInstance, OutlierInstance};
use rand::Rng;

fn int_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: u32, hi: u32) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(lo..=hi) as f64).collect())
        .collect()
}

/// Integer times in 1..=10, costs in 0..=10, capacities summing to at least
/// `n`, and a budget between the cheapest and the average assignment cost.
pub fn random_gap<R: Rng>(rng: &mut R, m: usize, n: usize) -> GapInstance {
    let p = int_matrix(rng, m, n, 1, 10);
    let c = int_matrix(rng, m, n, 0, 10);
    let mut b: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=n as u32)).collect();
    while b.iter().sum::<u32>() < n as u32 {
        let i = rng.gen_range(0..m);
        b[i] += 1;
    }
    let cheapest: f64 = (0..n).map(|j| (0..m).map(|i| c[i][j]).fold(f64::INFINITY, f64::min)).sum();
    let average: f64 = (0..n).map(|j| (0..m).map(|i| c[i][j]).sum::<f64>() / m as f64).sum();
    let budget = (cheapest + rng.gen::<f64>() * (average - cheapest)).ceil();
    GapInstance::new(p, c, b, budget).unwrap()
}

pub fn random_outlier<R: Rng>(rng: &mut R, m: usize, n: usize, eps: f64) -> OutlierInstance {
    let p = int_matrix(rng, m, n, 1, 10);
    let c = int_matrix(rng, m, n, 0, 10);
    let profits: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64).collect();
    let total: f64 = profits.iter().sum();
    let floor = (rng.gen_range(0.3..0.8) * total).round();
    let average: f64 = (0..n).map(|j| (0..m).map(|i| c[i][j]).sum::<f64>() / m as f64).sum();
    let budget = (rng.gen_range(0.5..1.0) * average).round();
    OutlierInstance::new(p, c, profits, budget, floor, eps).unwrap()
}

pub fn random_maxmin<R: Rng>(rng: &mut R, k: usize, m: usize, caps: bool) -> MaxMinInstance {
    let u = int_matrix(rng, k, m, 0, 10);
    let caps = caps.then(|| (0..k).map(|_| rng.gen_range(1..=(m / k + 1) as u32)).collect());
    MaxMinInstance::new(u, caps).unwrap()
}
