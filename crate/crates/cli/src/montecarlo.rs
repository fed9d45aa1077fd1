use rayon::prelude::*;

use polyround::maxmin::{self, FlowMatchGraph, Params, DEFAULT_EPSILON};
use polyround::{gapcap, outlier, Error};

use crate::instance::Instance;
use crate::report::{EdgeMarginal, MonteCarloReport};
use crate::{cap_start, gap_start, outlier_start, trial_rng, Failure};

struct Trial {
    /// One indicator per tracked edge.
    hits: Vec<bool>,
    objective: f64,
    iterations: usize,
}

/// Runs `trials` independent roundings; trial `t` draws from sub-stream `t`
/// so the aggregate does not depend on scheduling across workers.
fn collect<F>(trials: usize, seed: u64, f: F) -> Result<Vec<Trial>, Failure>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Trial, Error> + Sync,
{
    let results: Vec<Result<Trial, Error>> = (0..trials as u64).into_par_iter().map(|t| f(&mut trial_rng(seed, t))).collect();
    results.into_iter().map(|r| r.map_err(Failure::Core)).collect()
}

fn summarize(
    kind: &'static str,
    seed: u64,
    lp_bound: f64,
    edges: &[(usize, usize, f64)],
    runs: &[Trial],
    minimize: bool,
) -> MonteCarloReport {
    let n = runs.len();
    let band = 4.0 * (0.25 / n as f64).sqrt();
    let marginals: Vec<EdgeMarginal> = edges
        .iter()
        .enumerate()
        .map(|(k, &(r, c, x))| {
            let hits = runs.iter().filter(|t| t.hits[k]).count() as f64;
            EdgeMarginal::new(r, c, x, hits, n)
        })
        .collect();
    let max_deviation = marginals.iter().map(|e| e.deviation).fold(0.0, f64::max);
    let objectives = runs.iter().map(|t| t.objective);
    let worst = if minimize { objectives.clone().fold(f64::NEG_INFINITY, f64::max) } else { objectives.clone().fold(f64::INFINITY, f64::min) };
    MonteCarloReport {
        command: "montecarlo",
        kind,
        seed,
        trials: n,
        lp_bound,
        band,
        max_deviation,
        within_band: max_deviation <= band,
        edges: marginals,
        mean_objective: objectives.sum::<f64>() / n as f64,
        worst_objective: worst,
        max_iterations: runs.iter().map(|t| t.iterations).max().unwrap_or(0),
    }
}

pub fn run(inst: &Instance, seed: u64, trials: usize, precision: Option<f64>) -> Result<MonteCarloReport, Failure> {
    match inst {
        Instance::GapCap { inst, fractional } => {
            let (t, cap, x) = gap_start(inst, fractional.as_ref(), precision)?;
            let edges: Vec<(usize, usize, f64)> = cap.edges.iter().zip(x.iter()).map(|(&(i, j), &v)| (i, j, v)).collect();
            let runs = collect(trials, seed, |rng| {
                let s = gapcap::sched_cap_round(inst, &cap, &x, rng)?;
                Ok(Trial {
                    hits: cap.edges.iter().map(|&(i, j)| s.assign[j] == i).collect(),
                    objective: s.makespan,
                    iterations: s.iterations,
                })
            })?;
            Ok(summarize("gap-cap", seed, t, &edges, &runs, true))
        }
        Instance::Outlier { inst, fractional } => {
            let (t, out, x) = outlier_start(inst, fractional.as_ref(), precision)?;
            let edges: Vec<(usize, usize, f64)> = out.edges.iter().zip(x.iter()).map(|(&(i, j), &v)| (i, j, v)).collect();
            let runs = collect(trials, seed, |rng| {
                let s = outlier::sched_outlier_round(inst, &out, &x, rng)?;
                Ok(Trial {
                    hits: out.edges.iter().map(|&(i, j)| s.assign[j] == Some(i)).collect(),
                    objective: s.makespan,
                    iterations: s.iterations,
                })
            })?;
            Ok(summarize("outlier", seed, t, &edges, &runs, true))
        }
        Instance::MaxMin { inst, fractional } if inst.caps.is_some() => {
            let (t, x) = cap_start(inst, fractional.as_ref())?;
            let edges: Vec<(usize, usize, f64)> = (0..inst.persons)
                .flat_map(|i| (0..inst.goods).map(move |j| (i, j)))
                .filter(|&(i, j)| x[i][j] > 0.0 && inst.u[i][j] > 0.0)
                .map(|(i, j)| (i, j, x[i][j]))
                .collect();
            let runs = collect(trials, seed, |rng| {
                let out = maxmin::maxmin_cap_round(inst, &x, rng)?;
                Ok(Trial {
                    hits: edges.iter().map(|&(i, j, _)| out.allocation.owner[j] == Some(i)).collect(),
                    objective: out.allocation.min_utility(),
                    iterations: out.iterations,
                })
            })?;
            Ok(summarize("maxmin-capacitated", seed, t, &edges, &runs, false))
        }
        Instance::MaxMin { inst, .. } => {
            // marginals of the big-good matching, the one randomized step with
            // exact edge probabilities
            let params = Params::for_persons(inst.persons);
            let lp = maxmin::search_config_lp(inst, params.lambda, DEFAULT_EPSILON)?
                .ok_or_else(|| Error::Infeasible("no positive threshold is feasible".into()))?;
            let g = FlowMatchGraph::from_lp(inst, &lp);
            let edges: Vec<(usize, usize, f64)> = (0..inst.persons)
                .flat_map(|i| (0..inst.goods).map(move |j| (i, j)))
                .filter(|&(i, j)| g.matching[i][j] && g.w[i][j] > 0.0)
                .map(|(i, j)| (i, j, g.w[i][j]))
                .collect();
            let runs = collect(trials, seed, |rng| {
                let matched = maxmin::sample_matching(&g, rng);
                let claims = maxmin::claim_bundles(&g, &lp, &matched, params.eps1, rng);
                let cg = maxmin::contention_graph(inst, &g, &claims);
                let mut owner = maxmin::resolve_contention(inst, &cg, rng)?;
                for (i, m) in matched.iter().enumerate() {
                    if let Some(j) = *m {
                        owner[j] = Some(i);
                    }
                }
                let a = polyround::Allocation::from_owner(inst, owner);
                Ok(Trial {
                    hits: edges.iter().map(|&(i, j, _)| matched[i] == Some(j)).collect(),
                    objective: a.min_utility(),
                    iterations: 0,
                })
            })?;
            Ok(summarize("maxmin", seed, lp.t, &edges, &runs, false))
        }
    }
}
