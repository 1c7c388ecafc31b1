//! Privacy attacks against protected and baseline traces.

use std::fmt::Write;

use clap::Args;
use serde::{Deserialize, Serialize};
use zaps_core::privacy::{evaluate_seeds, AttackKind, AttackReport, EvalParams, PrivacySummary, TraceMode};

use super::to_json;
use crate::error::CliError;
use crate::manifest::OutputFile;
use crate::{Report, Status};

#[derive(Debug, Args, Serialize)]
pub struct Flags {
    /// all, clustering, linkability or proofdist.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// both, protected or baseline.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// First seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to average over.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uavs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sessions: Option<usize>,
    /// Same-UAV and different-UAV pairs sampled by the linkability attack.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub kind: String,
    pub mode: String,
    pub seed: u64,
    pub seeds: u64,
    pub uavs: usize,
    pub sessions: usize,
    pub pairs: usize,
}

impl Default for Config {
    fn default() -> Self {
        let p = EvalParams::default();
        Config {
            kind: "all".into(),
            mode: "both".into(),
            seed: 0,
            seeds: 10,
            uavs: p.uavs,
            sessions: p.sessions_per_uav,
            pairs: p.pairs_per_class,
        }
    }
}

/// Target interval for a seed-averaged metric.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

pub fn band(attack: AttackKind, mode: TraceMode) -> Option<Band> {
    let b = |low, high| Some(Band { low, high });
    match (mode, attack) {
        (TraceMode::Protected, AttackKind::Linkability) => b(0.50, 0.68),
        (TraceMode::Protected, AttackKind::Proofdist) => b(0.50, 0.62),
        (TraceMode::Protected, AttackKind::Clustering) => b(f64::NEG_INFINITY, 0.20),
        (TraceMode::Baseline, AttackKind::Linkability) => b(0.80, 1.0),
        (TraceMode::Baseline, AttackKind::Clustering) => b(0.60, 1.0),
        (TraceMode::Baseline, AttackKind::Proofdist) => None,
    }
}

#[derive(Serialize)]
struct MetricSummary {
    mode: TraceMode,
    attack: AttackKind,
    mean: f64,
    per_seed: Vec<f64>,
    band_low: Option<f64>,
    band_high: Option<f64>,
    within_band: Option<bool>,
}

#[derive(Serialize)]
struct Summary {
    seeds: Vec<u64>,
    uavs: usize,
    sessions_per_uav: usize,
    pairs_per_class: usize,
    metrics: Vec<MetricSummary>,
}

fn kinds(s: &str) -> Result<Vec<AttackKind>, CliError> {
    Ok(match s {
        "all" => vec![AttackKind::Clustering, AttackKind::Linkability, AttackKind::Proofdist],
        "clustering" => vec![AttackKind::Clustering],
        "linkability" => vec![AttackKind::Linkability],
        "proofdist" => vec![AttackKind::Proofdist],
        _ => return Err(CliError::Usage(format!("unknown attack kind {s:?}"))),
    })
}

fn modes(s: &str) -> Result<Vec<TraceMode>, CliError> {
    Ok(match s {
        "both" => vec![TraceMode::Protected, TraceMode::Baseline],
        "protected" => vec![TraceMode::Protected],
        "baseline" => vec![TraceMode::Baseline],
        _ => return Err(CliError::Usage(format!("unknown mode {s:?}"))),
    })
}

pub fn run(cfg: &Config) -> Result<Report, CliError> {
    let kinds = kinds(&cfg.kind)?;
    let modes = modes(&cfg.mode)?;
    if cfg.seeds == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    let params = EvalParams {
        uavs: cfg.uavs,
        sessions_per_uav: cfg.sessions,
        pairs_per_class: cfg.pairs,
        ..EvalParams::default()
    };
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + cfg.seeds).collect();
    let (protected, baseline) = evaluate_seeds(&params, &seeds).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut csv = String::from(AttackReport::csv_header());
    csv.push('\n');
    let mut metrics = Vec::new();
    let mut out = String::new();
    for mode in &modes {
        let s: &PrivacySummary = if *mode == TraceMode::Protected { &protected } else { &baseline };
        for attack in &kinds {
            let picked: Vec<&AttackReport> = s.reports.iter().filter(|r| r.attack == *attack).collect();
            for r in &picked {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            let mean = s.metric(*attack);
            let b = band(*attack, *mode);
            let within = b.map(|b| (b.low..=b.high).contains(&mean));
            writeln!(
                out,
                "{:<10} {:<12} {:.4}{}",
                mode.label(),
                attack.label(),
                mean,
                match within {
                    Some(true) => "  in band",
                    Some(false) => "  OUT OF BAND",
                    None => "",
                }
            )
            .unwrap();
            metrics.push(MetricSummary {
                mode: *mode,
                attack: *attack,
                mean,
                per_seed: picked.iter().map(|r| r.value).collect(),
                band_low: b.map(|b| b.low).filter(|v| v.is_finite()),
                band_high: b.map(|b| b.high),
                within_band: within,
            });
        }
    }
    let summary = Summary {
        seeds,
        uavs: params.uavs,
        sessions_per_uav: params.sessions_per_uav,
        pairs_per_class: params.pairs_per_class,
        metrics,
    };
    Ok(Report {
        files: vec![OutputFile::new("attack.csv", csv), OutputFile::new("attack.json", to_json(&summary))],
        stdout: out,
        status: Status::Success,
    })
}
