//! Heading-error statistics in degrees and their aggregation over runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runlog::LogRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_deg: f64,
    /// Population standard deviation.
    pub std_deg: f64,
    pub rmse_deg: f64,
    pub mae_deg: f64,
}

pub fn compute_metrics(series: &[f64]) -> Result<Metrics> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one sample".into()));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("metric series"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let ms = series.iter().map(|x| x * x).sum::<f64>() / n;
    let mae = series.iter().map(|x| x.abs()).sum::<f64>() / n;
    Ok(Metrics {
        mean_deg: mean,
        std_deg: var.sqrt(),
        rmse_deg: ms.sqrt(),
        mae_deg: mae,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub log: String,
    pub ticks: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub visible_fraction: f64,
    pub collisions: usize,
}

impl RunSummary {
    pub fn from_rows(log: &str, rows: &[LogRow]) -> Result<Self> {
        let series: Vec<f64> = rows.iter().map(|r| r.dtheta_deg).collect();
        let metrics = compute_metrics(&series)?;
        let visible = rows.iter().filter(|r| r.visible).count();
        Ok(Self {
            log: log.to_string(),
            ticks: rows.len(),
            metrics,
            visible_fraction: visible as f64 / rows.len() as f64,
            collisions: rows.iter().filter(|r| r.collision).count(),
        })
    }
}

/// Scenario-level summary: every metric is the mean of the per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub runs: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub visible_fraction: f64,
    pub collisions: usize,
    pub per_run: Vec<RunSummary>,
}

impl MetricsSummary {
    pub fn aggregate(per_run: Vec<RunSummary>) -> Result<Self> {
        if per_run.is_empty() {
            return Err(Error::InvalidArgument("no runs to aggregate".into()));
        }
        let n = per_run.len() as f64;
        let avg = |f: fn(&RunSummary) -> f64| per_run.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            runs: per_run.len(),
            metrics: Metrics {
                mean_deg: avg(|r| r.metrics.mean_deg),
                std_deg: avg(|r| r.metrics.std_deg),
                rmse_deg: avg(|r| r.metrics.rmse_deg),
                mae_deg: avg(|r| r.metrics.mae_deg),
            },
            visible_fraction: avg(|r| r.visible_fraction),
            collisions: per_run.iter().map(|r| r.collisions).sum(),
            per_run,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
