//! Swarm scalability sweep over UAV counts.

use std::fmt::Write;

use clap::Args;
use serde::{Deserialize, Serialize};
use zaps_core::netsim::{handling_curve, handling_fit, is_monotone, metrics_csv, sweep_uavs, CostModel, SimConfig};
use zaps_core::snark::Backend;

use super::to_json;
use crate::config::parse_range;
use crate::error::CliError;
use crate::manifest::OutputFile;
use crate::{Report, Status};

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    /// UAV counts as START:END:STEP or a single N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uavs: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of consecutive seeds averaged per point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sessions_per_uav: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_waypoint: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Message loss probability.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<u32>,
    /// Idle time before each session, ms.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub think_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub uavs: String,
    pub seed: u64,
    pub seeds: u64,
    pub sessions_per_uav: usize,
    pub per_waypoint: bool,
    pub backend: Backend,
    pub loss: f64,
    pub delay_ms: (u64, u64),
    pub delta_t: u32,
    pub think_ms: u64,
}

impl Default for Config {
    fn default() -> Self {
        let sim = SimConfig::default();
        Config {
            uavs: "10:100:10".into(),
            seed: 1,
            seeds: 1,
            sessions_per_uav: sim.sessions_per_uav,
            per_waypoint: false,
            backend: sim.backend,
            loss: sim.loss,
            delay_ms: sim.delay_ms,
            delta_t: sim.delta_t,
            think_ms: sim.think_ms,
        }
    }
}

#[derive(Serialize)]
struct Fit {
    curve: Vec<(usize, f64)>,
    intercept: f64,
    slope: f64,
    r_squared: f64,
    monotone: bool,
    bytes_per_uav: Vec<(usize, f64)>,
    success_rate: f64,
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let counts = parse_range(&cfg.uavs)?;
    if cfg.seeds == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    let base = SimConfig {
        sessions_per_uav: cfg.sessions_per_uav,
        seed: cfg.seed,
        delta_t: cfg.delta_t,
        delay_ms: cfg.delay_ms,
        loss: cfg.loss,
        backend: cfg.backend,
        per_waypoint: cfg.per_waypoint,
        think_ms: cfg.think_ms,
        cost: CostModel::pinned(cfg.backend),
        ..SimConfig::default()
    };
    for &n in &counts {
        SimConfig { uavs: n, ..base.clone() }
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + cfg.seeds).collect();
    let rows = sweep_uavs(&base, &counts, &seeds).map_err(|e| CliError::Run(e.to_string()))?;
    let curve = handling_curve(&rows);
    let fit = handling_fit(&curve);
    let monotone = is_monotone(&curve);
    let mut bytes_per_uav = Vec::new();
    for &n in &counts {
        let v: Vec<f64> = rows.iter().filter(|r| r.uavs == n).map(|r| r.bytes_per_uav).collect();
        bytes_per_uav.push((n, v.iter().sum::<f64>() / v.len() as f64));
    }
    let sessions: usize = rows.iter().map(|r| r.sessions).sum();
    let confirmed: usize = rows.iter().map(|r| r.confirmed).sum();
    let summary = Fit {
        curve: curve.clone(),
        intercept: fit.intercept,
        slope: fit.slope,
        r_squared: fit.r_squared,
        monotone,
        bytes_per_uav,
        success_rate: confirmed as f64 / sessions.max(1) as f64,
    };

    let mut out = String::from("uavs  handling_ms\n");
    for (n, h) in &curve {
        writeln!(out, "{n:>4}  {h:>10.4}").unwrap();
    }
    writeln!(
        out,
        "fit: {:.4} + {:.5} * uavs  r2 {:.4}  monotone {monotone}",
        fit.intercept, fit.slope, fit.r_squared
    )
    .unwrap();
    Ok(Report {
        files: vec![
            OutputFile::new("simulate.csv", metrics_csv(&rows)),
            OutputFile::new("simulate-fit.json", to_json(&summary)),
        ],
        stdout: out,
        status: Status::Success,
    })
}
