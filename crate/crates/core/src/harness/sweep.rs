//! One-parameter sweeps over a base configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_experiment, HarnessError, RunConfig, RunOutput, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Lr,
    Beta,
    Epsilon,
    WeightDecay,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Lr => "lr",
            SweepParam::Beta => "beta",
            SweepParam::Epsilon => "epsilon",
            SweepParam::WeightDecay => "weight_decay",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) {
        let o = &mut cfg.optimizer;
        match self {
            SweepParam::Gamma => o.gamma = value,
            SweepParam::Lr => o.lr = value,
            SweepParam::Beta => o.beta = value,
            SweepParam::Epsilon => o.epsilon = value,
            SweepParam::WeightDecay => o.weight_decay = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepParam::Gamma,
            SweepParam::Lr,
            SweepParam::Beta,
            SweepParam::Epsilon,
            SweepParam::WeightDecay,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| HarnessError::Invalid {
            field: "param".into(),
            message: format!("unknown sweep parameter `{s}`"),
        })
    }
}

/// Parses a comma-separated value list such as `0.1,1,10,100`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, HarnessError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|e| HarnessError::Invalid {
                field: "values".into(),
                message: format!("`{v}`: {e}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(HarnessError::Invalid {
            field: "values".into(),
            message: "empty list".into(),
        });
    }
    Ok(values)
}

/// The base config with one parameter replaced and its outputs moved to a
/// per-value subdirectory.
pub fn point_config(base: &RunConfig, param: SweepParam, value: f64) -> RunConfig {
    let mut cfg = base.clone();
    param.apply(&mut cfg, value);
    cfg.output.dir = base.output.dir.join(format!("{param}={value}"));
    cfg
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub config: RunConfig,
    pub result: Result<RunOutput, HarnessError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Whether final loss, ordered by parameter value, falls then rises.
    /// Reported only; toy problems need not share the large-scale optimum.
    pub unimodal: bool,
    pub best_value: Option<f64>,
}

/// True when `xs` is non-increasing up to its minimum and non-decreasing
/// after it.
pub fn is_unimodal(xs: &[f64]) -> bool {
    let Some(k) = xs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    xs[..=k].windows(2).all(|w| w[0] >= w[1]) && xs[k..].windows(2).all(|w| w[0] <= w[1])
}

/// Runs each value's configuration, at most `workers` at a time when built
/// with the `parallel` feature. Points are returned in the order of `values`.
pub fn run_sweep(
    base: &RunConfig,
    param: SweepParam,
    values: &[f64],
    workers: Option<usize>,
) -> Result<Vec<SweepPoint>, HarnessError> {
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| point_config(base, param, v))
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let run = |cfg: RunConfig, value: f64| SweepPoint {
        value,
        result: run_experiment(&cfg),
        config: cfg,
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| HarnessError::Invalid {
                field: "workers".into(),
                message: e.to_string(),
            })?;
        Ok(pool.install(|| {
            configs
                .into_par_iter()
                .zip(values.par_iter())
                .map(|(cfg, &v)| run(cfg, v))
                .collect()
        }))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(configs
            .into_iter()
            .zip(values)
            .map(|(cfg, &v)| run(cfg, v))
            .collect())
    }
}

pub fn sweep_report(param: SweepParam, points: &[SweepPoint]) -> SweepReport {
    let rows: Vec<SweepRow> = points
        .iter()
        .map(|p| SweepRow {
            value: p.value,
            summary: p.result.as_ref().ok().map(|o| o.summary.clone()),
            error: p.result.as_ref().err().map(|e| e.to_string()),
            output_dir: p.config.output.dir.clone(),
        })
        .collect();
    let mut finite: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.summary.as_ref().map(|s| (r.value, s.final_loss)))
        .collect();
    finite.sort_by(|a, b| a.0.total_cmp(&b.0));
    let losses: Vec<f64> = finite.iter().map(|p| p.1).collect();
    SweepReport {
        param,
        unimodal: is_unimodal(&losses),
        best_value: finite
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|p| p.0),
        rows,
    }
}
