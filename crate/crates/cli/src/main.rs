use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rldwa::controller::DriveMode;
use rldwa::env::STATE_DIM;
use rldwa::eval::{evaluate, summarize_logs};
use rldwa::runlog::load_log;
use rldwa::sac::load_policy;
use rldwa::scenario::ScenarioConfig;
use rldwa::svg::{render, PlotOptions};
use rldwa::train::{train, Preset};

#[derive(Parser)]
#[command(name = "rldwa", version, about = "Person following with a DWA planner and a SAC yaw agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a yaw agent.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Print only the final line.
        #[arg(long)]
        quiet: bool,
    },
    /// Run seeded evaluation episodes and summarize them.
    Eval {
        /// Checkpoint directory or actor file; not needed for `--mode diff`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 7)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot a run log as SVG.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draw this scenario's obstacles under the paths.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Recompute the summary of a directory of run logs.
    Metrics {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Smoke,
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Omni,
    Diff,
    DiffAgent,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    fs::write(path, text).map_err(runtime)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train {
            config: cfg,
            seed,
            out,
            preset,
            quiet,
        } => {
            let sc = ScenarioConfig::load(&cfg).map_err(config)?;
            let preset = preset.map(|p| match p {
                PresetArg::Smoke => Preset::Smoke,
                PresetArg::Desk => Preset::Desk,
                PresetArg::Paper => Preset::Paper,
            });
            let mut checked = sc.clone();
            if let Some(p) = preset {
                p.apply(&mut checked);
            }
            checked.validate().map_err(config)?;
            let m = train(&sc, seed, preset, &out, &mut |r| {
                if !quiet {
                    eprintln!(
                        "episode {:>5}  return {:>8.2}  r_yaw {:>6.3}  |dtheta| {:>6.2} deg  eps {:.3}  alpha {:.4}",
                        r.episode, r.ret, r.mean_r_yaw, r.mean_abs_dtheta_deg, r.epsilon, r.alpha
                    );
                }
            })
            .map_err(runtime)?;
            println!(
                "trained {} episodes ({} steps, {} updates); checkpoint {}",
                m.episodes,
                m.total_steps,
                m.updates,
                out.join(&m.final_checkpoint).display()
            );
        }
        Command::Eval {
            checkpoint,
            scenario,
            mode,
            runs,
            seed,
            out,
        } => {
            let sc = ScenarioConfig::load(&scenario).map_err(config)?;
            let mode = match mode {
                ModeArg::Omni => DriveMode::Omni,
                ModeArg::Diff => DriveMode::Differential,
                ModeArg::DiffAgent => DriveMode::DiffAgent,
            };
            let policy = match (&checkpoint, mode) {
                (Some(p), _) => Some(load_policy(p, STATE_DIM).map_err(config)?),
                (None, DriveMode::Differential) => None,
                (None, _) => {
                    return Err(Failure::Config(format!("--mode {} needs --checkpoint", mode.name())))
                }
            };
            if runs == 0 {
                return Err(Failure::Config("--runs must be at least 1".into()));
            }
            let ckpt = checkpoint.as_ref().map(|p| p.display().to_string());
            let s = evaluate(&sc, policy.as_ref(), ckpt.as_deref(), mode, runs, seed, &out)
                .map_err(runtime)?;
            println!(
                "{} {}: rmse {:.2} deg  mae {:.2} deg  mean {:.2} deg  std {:.2} deg  visible {:.3}  collisions {}",
                sc.name,
                mode.name(),
                s.metrics.rmse_deg,
                s.metrics.mae_deg,
                s.metrics.mean_deg,
                s.metrics.std_deg,
                s.visible_fraction,
                s.collisions
            );
        }
        Command::Replay { log, out, scenario } => {
            let rows = load_log(&log).map_err(config)?;
            let obstacles = match scenario {
                Some(p) => ScenarioConfig::load(&p).map_err(config)?.obstacles,
                None => Vec::new(),
            };
            write_file(&out, &render(&rows, &obstacles, &PlotOptions::default()))?;
        }
        Command::Metrics { logs, out } => {
            let s = summarize_logs(&logs).map_err(config)?;
            write_file(&out, &s.to_json().map_err(runtime)?)?;
            println!(
                "{} runs: rmse {:.2} deg  mae {:.2} deg",
                s.runs, s.metrics.rmse_deg, s.metrics.mae_deg
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
