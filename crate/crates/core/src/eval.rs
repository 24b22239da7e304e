//! Seeded evaluation runs of a drive mode on one scenario, writing per-run
//! logs and plots plus an aggregated summary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{run_episode, DriveMode, PolicyYaw, YawSource};
use crate::env::{Normalization, StateVec};
use crate::error::{Error, Result};
use crate::metrics::{MetricsSummary, RunSummary};
use crate::runlog::{load_log, save_log};
use crate::sac::GaussianPolicy;
use crate::scenario::ScenarioConfig;
use crate::svg::{render, PlotOptions};

/// Everything about an evaluation that is not derivable from its logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalManifest {
    pub scenario: String,
    pub mode: DriveMode,
    pub runs: usize,
    pub seed: u64,
    pub ticks: usize,
    pub checkpoint: Option<String>,
    pub logs: Vec<String>,
    pub plots: Vec<String>,
}

pub fn run_name(i: usize) -> String {
    format!("run_{i:02}")
}

/// Seed of run `i` in an evaluation seeded with `seed`.
pub fn run_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

/// Runs `runs` episodes and writes `run_NN.csv`, `run_NN.svg`,
/// `summary.json` and `eval.json` into `out`. Modes that steer with the
/// agent need `policy`.
pub fn evaluate(
    scenario: &ScenarioConfig,
    policy: Option<&GaussianPolicy>,
    checkpoint: Option<&str>,
    mode: DriveMode,
    runs: usize,
    seed: u64,
    out: &Path,
) -> Result<MetricsSummary> {
    if runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    scenario.validate()?;
    let mut yaw: Box<dyn YawSource + '_> = match (mode, policy) {
        (DriveMode::Differential, _) => Box::new(NoYaw),
        (_, Some(p)) => Box::new(PolicyYaw(p)),
        (_, None) => {
            return Err(Error::Config(format!("mode {} needs a checkpoint", mode.name())))
        }
    };
    fs::create_dir_all(out)?;
    let ticks = scenario.eval_ticks();
    let mut per_run = Vec::with_capacity(runs);
    let mut logs = Vec::with_capacity(runs);
    let mut plots = Vec::with_capacity(runs);
    for i in 0..runs {
        let rows = run_episode(scenario, mode, yaw.as_mut(), run_seed(seed, i), ticks)?;
        let log = format!("{}.csv", run_name(i));
        let plot = format!("{}.svg", run_name(i));
        save_log(&out.join(&log), &rows)?;
        fs::write(out.join(&plot), render(&rows, &scenario.obstacles, &PlotOptions::default()))?;
        per_run.push(RunSummary::from_rows(&log, &rows)?);
        logs.push(log);
        plots.push(plot);
    }
    let summary = MetricsSummary::aggregate(per_run)?;
    fs::write(out.join("summary.json"), summary.to_json()?)?;
    let manifest = EvalManifest {
        scenario: scenario.name.clone(),
        mode,
        runs,
        seed,
        ticks,
        checkpoint: checkpoint.map(str::to_string),
        logs,
        plots,
    };
    fs::write(out.join("eval.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(summary)
}

/// The classic differential mode steers with the planner alone.
struct NoYaw;

impl YawSource for NoYaw {
    fn yaw(&mut self, _: &StateVec, _: &Normalization) -> Result<f64> {
        Ok(0.0)
    }
}

/// Summarizes every `*.csv` log in `dir`, in file-name order.
pub fn summarize_logs(dir: &Path) -> Result<MetricsSummary> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no .csv logs in {}", dir.display())));
    }
    let mut per_run = Vec::with_capacity(files.len());
    for f in &files {
        let rows = load_log(f)?;
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        per_run.push(RunSummary::from_rows(&name, &rows).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::RunLog { row: 0, msg: format!("{name}: {m}") },
            other => other,
        })?);
    }
    MetricsSummary::aggregate(per_run)
}
