//! On-disk instance documents. Matrices are flat row-major arrays so a file
//! stays readable next to its dimensions.

use serde::Deserialize;

use polyround::{GapInstance, MaxMinInstance, OutlierInstance};

#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind")]
pub enum InstanceFile {
    #[serde(rename = "gap-cap")]
    GapCap(GapFile),
    #[serde(rename = "outlier")]
    Outlier(OutlierFile),
    #[serde(rename = "maxmin")]
    MaxMin(MaxMinFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapFile {
    pub machines: usize,
    pub jobs: usize,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub b: Vec<u32>,
    pub cost_budget: f64,
    #[serde(default)]
    pub makespan_target: Option<f64>,
    /// Optional starting point for `montecarlo`, machines × jobs.
    #[serde(default)]
    pub fractional: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierFile {
    pub machines: usize,
    pub jobs: usize,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub profits: Vec<f64>,
    pub cost_budget: f64,
    pub profit_floor: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub makespan_target: Option<f64>,
    #[serde(default)]
    pub fractional: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxMinFile {
    pub persons: usize,
    pub goods: usize,
    pub u: Vec<f64>,
    #[serde(default)]
    pub caps: Option<Vec<u32>>,
    #[serde(default)]
    pub fractional: Option<Vec<f64>>,
}

pub enum Instance {
    GapCap { inst: GapInstance, fractional: Option<Vec<Vec<f64>>> },
    Outlier { inst: OutlierInstance, fractional: Option<Vec<Vec<f64>>> },
    MaxMin { inst: MaxMinInstance, fractional: Option<Vec<Vec<f64>>> },
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::GapCap { .. } => "gap-cap",
            Instance::Outlier { .. } => "outlier",
            Instance::MaxMin { .. } => "maxmin",
        }
    }
}

fn rows(field: &str, flat: &[f64], rows: usize, cols: usize) -> Result<Vec<Vec<f64>>, ParseError> {
    if flat.len() != rows * cols {
        return Err(ParseError(format!(
            "field `{field}`: expected {rows}x{cols} = {} entries, found {}",
            rows * cols,
            flat.len()
        )));
    }
    if let Some(k) = flat.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(ParseError(format!("field `{field}`: entry {k} must be finite and non-negative")));
    }
    Ok(if cols == 0 { vec![Vec::new(); rows] } else { flat.chunks(cols).map(<[f64]>::to_vec).collect() })
}

fn length<T>(field: &str, v: &[T], want: usize) -> Result<(), ParseError> {
    if v.len() == want {
        Ok(())
    } else {
        Err(ParseError(format!("field `{field}`: expected {want} entries, found {}", v.len())))
    }
}

fn scalar(field: &str, v: f64) -> Result<f64, ParseError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ParseError(format!("field `{field}` must be finite and non-negative")))
    }
}

fn core(e: polyround::Error) -> ParseError {
    ParseError(e.to_string())
}

pub fn parse(text: &str) -> Result<Instance, ParseError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| ParseError(e.to_string()))?;
    match file {
        InstanceFile::GapCap(f) => {
            let p = rows("p", &f.p, f.machines, f.jobs)?;
            let c = rows("c", &f.c, f.machines, f.jobs)?;
            length("b", &f.b, f.machines)?;
            let fractional = f.fractional.map(|x| rows("fractional", &x, f.machines, f.jobs)).transpose()?;
            let mut inst = GapInstance::new(p, c, f.b, scalar("cost_budget", f.cost_budget)?).map_err(core)?;
            inst.makespan_target = f.makespan_target.map(|t| scalar("makespan_target", t)).transpose()?;
            Ok(Instance::GapCap { inst, fractional })
        }
        InstanceFile::Outlier(f) => {
            let p = rows("p", &f.p, f.machines, f.jobs)?;
            let c = rows("c", &f.c, f.machines, f.jobs)?;
            length("profits", &f.profits, f.jobs)?;
            let fractional = f.fractional.map(|x| rows("fractional", &x, f.machines, f.jobs)).transpose()?;
            let mut inst = OutlierInstance::new(
                p,
                c,
                f.profits,
                scalar("cost_budget", f.cost_budget)?,
                scalar("profit_floor", f.profit_floor)?,
                f.epsilon,
            )
            .map_err(core)?;
            inst.makespan_target = f.makespan_target.map(|t| scalar("makespan_target", t)).transpose()?;
            Ok(Instance::Outlier { inst, fractional })
        }
        InstanceFile::MaxMin(f) => {
            let u = rows("u", &f.u, f.persons, f.goods)?;
            let fractional = f.fractional.map(|x| rows("fractional", &x, f.persons, f.goods)).transpose()?;
            let inst = MaxMinInstance::new(u, f.caps).map_err(core)?;
            Ok(Instance::MaxMin { inst, fractional })
        }
    }
}
