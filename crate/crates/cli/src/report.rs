//! Report documents. Field names are part of the structured output format
//! and must not change.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Serialize)]
pub struct GapReport {
    pub command: &'static str,
    pub mode: &'static str,
    pub seed: Option<u64>,
    pub lp_makespan: f64,
    pub lp_cost: f64,
    pub makespan: f64,
    pub cost: f64,
    pub assign: Vec<usize>,
    pub loads: Vec<f64>,
    pub counts: Vec<usize>,
    pub iterations: usize,
    pub iteration_bound: usize,
}

#[derive(Serialize)]
pub struct OutlierReport {
    pub command: &'static str,
    pub mode: &'static str,
    pub seed: Option<u64>,
    pub epsilon: f64,
    pub lp_makespan: f64,
    pub lp_cost: f64,
    pub lp_profit: f64,
    pub makespan: f64,
    pub cost: f64,
    pub profit: f64,
    /// `null` for dropped jobs.
    pub assign: Vec<Option<usize>>,
    pub loads: Vec<f64>,
    pub iterations: usize,
    pub iteration_bound: usize,
    pub terminal_config: Option<String>,
}

#[derive(Serialize)]
pub struct MaxMinReport {
    pub command: &'static str,
    pub variant: &'static str,
    pub seed: u64,
    /// Threshold of the configuration LP, or the optimum of the assignment LP.
    pub lp_bound: f64,
    pub lambda: Option<f64>,
    pub eps1: Option<f64>,
    pub owner: Vec<Option<usize>>,
    pub utilities: Vec<f64>,
    pub counts: Vec<usize>,
    pub min_utility: f64,
    pub matched: Option<Vec<Option<usize>>>,
    pub iterations: Option<usize>,
    pub iteration_bound: Option<usize>,
}

#[derive(Serialize)]
pub struct FrontierEntry {
    pub profit: i64,
    pub cost: i64,
    pub makespan: i64,
    pub assign: Vec<Option<usize>>,
}

#[derive(Serialize)]
pub struct OracleReport {
    pub command: &'static str,
    pub kind: &'static str,
    /// Minimum makespan (scheduling) or maximum min-utility (allocation).
    pub optimum: f64,
    pub cost: Option<f64>,
    pub assign: Option<Vec<Option<usize>>>,
    pub frontier: Option<Vec<FrontierEntry>>,
}

#[derive(Serialize)]
pub struct EdgeMarginal {
    pub row: usize,
    pub col: usize,
    pub target: f64,
    pub mean: f64,
    pub deviation: f64,
    /// Deviation in binomial standard errors; 0 when the target is integral.
    pub z: f64,
}

#[derive(Serialize)]
pub struct MonteCarloReport {
    pub command: &'static str,
    pub kind: &'static str,
    pub seed: u64,
    pub trials: usize,
    pub lp_bound: f64,
    /// `4·sqrt(0.25/trials)`.
    pub band: f64,
    pub max_deviation: f64,
    pub within_band: bool,
    pub edges: Vec<EdgeMarginal>,
    pub mean_objective: f64,
    pub worst_objective: f64,
    pub max_iterations: usize,
}

impl EdgeMarginal {
    pub fn new(row: usize, col: usize, target: f64, hits: f64, trials: usize) -> Self {
        let n = trials as f64;
        let mean = hits / n;
        let sd = (target * (1.0 - target) / n).sqrt();
        let deviation = (mean - target).abs();
        Self { row, col, target, mean, deviation, z: if sd > 0.0 { deviation / sd } else { 0.0 } }
    }
}

pub fn render<T: Serialize>(report: &T, format: Format) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    match format {
        Format::Structured => {
            let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut out = String::new();
            flatten("", &value, &mut out);
            out
        }
    }
}

fn scalar_list(items: &[Value]) -> bool {
    items.iter().all(|v| !v.is_object() && !v.is_array())
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) if !scalar_list(items) => {
            for (k, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{k}]"), v, out);
            }
        }
        Value::Null => {}
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}
