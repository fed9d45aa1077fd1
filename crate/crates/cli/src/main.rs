mod instance;
mod montecarlo;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use polyround::gapcap::{self, CapLp};
use polyround::maxmin::{self, DEFAULT_EPSILON};
use polyround::outlier::{self, Guess, OutLp, DEFAULT_GUESS_BUDGET};
use polyround::{oracle, Error, GapInstance, MaxMinInstance, OutlierInstance, Point};

use instance::Instance;
use report::{Format, FrontierEntry, GapReport, MaxMinReport, OracleReport, OutlierReport};

#[derive(Parser)]
#[command(name = "polyround", version, about = "Randomized polytope rounding for assignment and allocation problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Instance document (JSON).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Assignment with hard capacities, makespan and cost budget.
    SolveGapCap {
        #[command(flatten)]
        common: Common,
        /// Bisection precision on the makespan guess; integral times search integers.
        #[arg(long)]
        precision: Option<f64>,
        /// Round with the seeded random walk instead of the deterministic one.
        #[arg(long)]
        randomized: bool,
    },
    /// Assignment with job profits, a profit floor and outliers.
    SolveOutlier {
        #[command(flatten)]
        common: Common,
        /// Overrides the instance's epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        precision: Option<f64>,
        #[arg(long)]
        randomized: bool,
    },
    /// Max-min fair allocation; uses the capacitated rounding when caps are given.
    SolveMaxmin {
        #[command(flatten)]
        common: Common,
        /// Relative precision of the threshold search.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Exhaustive exact solution of a small instance.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Repeated seeded rounding with per-edge empirical marginals.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        precision: Option<f64>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Io(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) | Failure::Core(Error::InvalidInput(_)) => 3,
            Failure::Core(Error::Infeasible(_)) => 2,
            Failure::Core(Error::BudgetExceeded(_)) => 4,
            Failure::Core(Error::SolverFailure(_)) => 1,
            Failure::Core(_) => 5,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Parse(m) => write!(f, "parse error: {m}"),
            Failure::Io(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

/// Generator for trial `t`: one seed, independent sub-streams.
pub fn trial_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

fn load(path: &PathBuf) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    instance::parse(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn wrong_kind(cmd: &str, inst: &Instance) -> Failure {
    Failure::Parse(format!("{cmd} cannot take a `{}` instance", inst.kind()))
}

fn max_load(p: &[Vec<f64>], x: &[Vec<f64>]) -> f64 {
    p.iter()
        .zip(x)
        .map(|(pr, xr)| pr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Relaxation and its point: the given fractional matrix at its own maximum
/// load, or the LP solution at the smallest feasible makespan.
pub fn gap_start(inst: &GapInstance, fractional: Option<&Vec<Vec<f64>>>, precision: Option<f64>) -> Result<(f64, CapLp, Point), Failure> {
    if let Some(x) = fractional {
        let t = inst.makespan_target.unwrap_or_else(|| max_load(&inst.p, x));
        let cap = gapcap::build_lp_cap(inst, t)?;
        let point = cap.point_from_matrix(x)?;
        return Ok((t, cap, point));
    }
    let t = match inst.makespan_target {
        Some(t) => t,
        None => gapcap::min_feasible_t(inst, precision)?,
    };
    let (cap, x) = gapcap::solve_lp_cap(inst, t)?.ok_or_else(|| Error::Infeasible(format!("relaxation infeasible at T = {t}")))?;
    Ok((t, cap, x))
}

pub fn outlier_start(
    inst: &OutlierInstance,
    fractional: Option<&Vec<Vec<f64>>>,
    precision: Option<f64>,
) -> Result<(f64, OutLp, Point), Failure> {
    if let Some(x) = fractional {
        let t = inst.makespan_target.unwrap_or_else(|| max_load(&inst.p, x));
        let out = outlier::build_lp_out(inst, t, &Guess::default())?;
        let point = out.point_from_matrix(x)?;
        return Ok((t, out, point));
    }
    let t = outlier::solve_outlier(inst, precision, DEFAULT_GUESS_BUDGET)?.t;
    let guesses = outlier::enumerate_guesses(inst, DEFAULT_GUESS_BUDGET)?;
    let (out, x) = outlier::feasible_guess(inst, t, &guesses)?.ok_or_else(|| Error::Infeasible(format!("no guess feasible at T = {t}")))?;
    Ok((t, out, x))
}

pub fn cap_start(inst: &MaxMinInstance, fractional: Option<&Vec<Vec<f64>>>) -> Result<(f64, Vec<Vec<f64>>), Failure> {
    match fractional {
        Some(x) => {
            let t = (0..inst.persons)
                .map(|i| inst.u[i].iter().zip(&x[i]).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            Ok((t, x.clone()))
        }
        None => Ok(maxmin::solve_cap_assignment_lp(inst)?),
    }
}

fn with_epsilon(mut inst: OutlierInstance, eps: Option<f64>) -> Result<OutlierInstance, Failure> {
    if let Some(e) = eps {
        inst.epsilon = e;
        inst.validate()?;
    }
    Ok(inst)
}

fn solve_gap(inst: &GapInstance, common: &Common, precision: Option<f64>, randomized: bool) -> Result<String, Failure> {
    let (t, lp_cost, s, mode, seed) = if randomized {
        let (t, cap, x) = gap_start(inst, None, precision)?;
        let s = gapcap::sched_cap_round(inst, &cap, &x, &mut trial_rng(common.seed, 0))?;
        (t, cap.cost(inst, &x), s, "randomized", Some(common.seed))
    } else {
        let sol = gapcap::solve_gap_cap(inst, precision)?;
        (sol.t, sol.lp_cost, sol.schedule, "derandomized", None)
    };
    let r = GapReport {
        command: "solve-gap-cap",
        mode,
        seed,
        lp_makespan: t,
        lp_cost,
        makespan: s.makespan,
        cost: s.cost,
        assign: s.assign,
        loads: s.loads,
        counts: s.counts,
        iterations: s.iterations,
        iteration_bound: s.iteration_bound,
    };
    Ok(report::render(&r, common.format))
}

fn solve_outlier(inst: &OutlierInstance, common: &Common, precision: Option<f64>, randomized: bool) -> Result<String, Failure> {
    let (t, lp_cost, lp_profit, s, mode, seed) = if randomized {
        let (t, out, x) = outlier_start(inst, None, precision)?;
        let s = outlier::sched_outlier_round(inst, &out, &x, &mut trial_rng(common.seed, 0))?;
        (t, out.cost(inst, &x), out.profit(inst, &x), s, "randomized", Some(common.seed))
    } else {
        let sol = outlier::solve_outlier(inst, precision, DEFAULT_GUESS_BUDGET)?;
        (sol.t, sol.lp_cost, sol.lp_profit, sol.schedule, "derandomized", None)
    };
    let r = OutlierReport {
        command: "solve-outlier",
        mode,
        seed,
        epsilon: inst.epsilon,
        lp_makespan: t,
        lp_cost,
        lp_profit,
        makespan: s.makespan,
        cost: s.cost,
        profit: s.profit,
        assign: s.assign,
        loads: s.loads,
        iterations: s.iterations,
        iteration_bound: s.iteration_bound,
        terminal_config: s.terminal.map(|t| t.config.to_string()),
    };
    Ok(report::render(&r, common.format))
}

fn solve_maxmin(inst: &MaxMinInstance, fractional: Option<&Vec<Vec<f64>>>, common: &Common, eps: f64) -> Result<String, Failure> {
    let mut rng = trial_rng(common.seed, 0);
    let r = if inst.caps.is_some() {
        let (t, x) = cap_start(inst, fractional)?;
        let out = maxmin::maxmin_cap_round(inst, &x, &mut rng)?;
        let a = out.allocation;
        MaxMinReport {
            command: "solve-maxmin",
            variant: "capacitated",
            seed: common.seed,
            lp_bound: t,
            lambda: None,
            eps1: None,
            min_utility: a.min_utility(),
            owner: a.owner,
            utilities: a.utilities,
            counts: a.counts,
            matched: None,
            iterations: Some(out.iterations),
            iteration_bound: Some(out.iteration_bound),
        }
    } else {
        let out = maxmin::maxmin_solve(inst, eps, &mut rng)?;
        let a = out.allocation;
        MaxMinReport {
            command: "solve-maxmin",
            variant: "configuration",
            seed: common.seed,
            lp_bound: out.t,
            lambda: Some(out.params.lambda),
            eps1: Some(out.params.eps1),
            min_utility: a.min_utility(),
            owner: a.owner,
            utilities: a.utilities,
            counts: a.counts,
            matched: Some(out.matched),
            iterations: None,
            iteration_bound: None,
        }
    };
    Ok(report::render(&r, common.format))
}

fn run_oracle(inst: &Instance, common: &Common) -> Result<String, Failure> {
    let r = match inst {
        Instance::GapCap { inst, .. } => {
            let s = oracle::exact_gap_cap(inst)?;
            OracleReport {
                command: "oracle",
                kind: "gap-cap",
                optimum: s.makespan,
                cost: Some(s.cost),
                assign: Some(s.assign.into_iter().map(Some).collect()),
                frontier: None,
            }
        }
        Instance::Outlier { inst, .. } => {
            let best = oracle::exact_outlier_min_makespan(inst)?;
            let frontier = oracle::exact_outlier(inst, None)?
                .into_iter()
                .map(|p| FrontierEntry { profit: p.profit, cost: p.cost, makespan: p.makespan, assign: p.assign })
                .collect();
            OracleReport {
                command: "oracle",
                kind: "outlier",
                optimum: best.makespan as f64,
                cost: Some(best.cost as f64),
                assign: Some(best.assign),
                frontier: Some(frontier),
            }
        }
        Instance::MaxMin { inst, .. } => {
            let e = oracle::exact_maxmin(inst)?;
            OracleReport {
                command: "oracle",
                kind: "maxmin",
                optimum: e.value as f64,
                cost: None,
                assign: Some(e.allocation.owner),
                frontier: None,
            }
        }
    };
    Ok(report::render(&r, common.format))
}

fn run(cli: Cli) -> Result<(String, Option<PathBuf>), Failure> {
    let (text, common) = match cli.command {
        Command::SolveGapCap { common, precision, randomized } => match load(&common.input)? {
            Instance::GapCap { inst, .. } => (solve_gap(&inst, &common, precision, randomized)?, common),
            other => return Err(wrong_kind("solve-gap-cap", &other)),
        },
        Command::SolveOutlier { common, epsilon, precision, randomized } => match load(&common.input)? {
            Instance::Outlier { inst, .. } => {
                let inst = with_epsilon(inst, epsilon)?;
                (solve_outlier(&inst, &common, precision, randomized)?, common)
            }
            other => return Err(wrong_kind("solve-outlier", &other)),
        },
        Command::SolveMaxmin { common, epsilon } => match load(&common.input)? {
            Instance::MaxMin { inst, fractional } => (solve_maxmin(&inst, fractional.as_ref(), &common, epsilon)?, common),
            other => return Err(wrong_kind("solve-maxmin", &other)),
        },
        Command::Oracle { common } => {
            let inst = load(&common.input)?;
            (run_oracle(&inst, &common)?, common)
        }
        Command::Montecarlo { common, trials, epsilon, precision } => {
            if trials == 0 {
                return Err(Failure::Parse("--trials must be positive".into()));
            }
            let inst = match load(&common.input)? {
                Instance::Outlier { inst, fractional } => Instance::Outlier { inst: with_epsilon(inst, epsilon)?, fractional },
                other => other,
            };
            let r = montecarlo::run(&inst, common.seed, trials, precision)?;
            (report::render(&r, common.format), common)
        }
    };
    Ok((text, common.output))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(text, output)| match output {
        Some(path) => std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("polyround: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
