//! Episodic SAC training of the yaw agent in the following environment,
//! with a CSV learning curve and periodic checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{FollowEnv, STATE_DIM};
use crate::error::{Error, Result};
use crate::sac::{LossReport, ReplayBuffer, SacAgent, Transition};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// A few episodes, for checking the pipeline end to end.
    Smoke,
    /// Fits a desktop CPU in well under an hour.
    Desk,
    /// The full schedule from the config.
    Paper,
}

impl Preset {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "smoke" => Some(Preset::Smoke),
            "desk" => Some(Preset::Desk),
            "paper" => Some(Preset::Paper),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Smoke => "smoke",
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    /// Overrides schedule and batch settings on top of a scenario config.
    pub fn apply(self, sc: &mut ScenarioConfig) {
        let (episodes, batch, every, warmup, ckpt) = match self {
            Preset::Smoke => (20, 64, 4, 500, 10),
            Preset::Desk => (600, 64, 2, 1000, 50),
            Preset::Paper => (3300, 256, 1, 1000, 100),
        };
        sc.episode.episodes = episodes;
        sc.sac.batch_size = batch;
        sc.sac.update_every = every;
        sc.sac.warmup_steps = warmup;
        sc.episode.checkpoint_every = ckpt;
    }
}

/// One row of the learning curve. Losses are averages over the updates made
/// during the episode and zero when there were none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub mean_r_yaw: f64,
    pub mean_abs_dtheta_deg: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub entropy: f64,
    pub updates: u64,
    pub collisions: usize,
}

pub const CURVE_COLUMNS: [&str; 13] = [
    "episode",
    "steps",
    "return",
    "mean_r_yaw",
    "mean_abs_dtheta_deg",
    "epsilon",
    "alpha",
    "critic1",
    "critic2",
    "actor",
    "entropy",
    "updates",
    "collisions",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainManifest {
    pub seed: u64,
    pub preset: Option<Preset>,
    pub episodes: usize,
    pub total_steps: u64,
    pub updates: u64,
    pub final_checkpoint: String,
    pub checkpoints: Vec<String>,
    pub config: ScenarioConfig,
}

#[derive(Default)]
struct LossAccumulator {
    sum: LossReport,
    n: u64,
}

impl LossAccumulator {
    fn add(&mut self, r: &LossReport) {
        self.sum.critic1 += r.critic1;
        self.sum.critic2 += r.critic2;
        self.sum.actor += r.actor;
        self.sum.entropy += r.entropy;
        self.n += 1;
    }

    fn mean(&self) -> LossReport {
        if self.n == 0 {
            return LossReport::default();
        }
        let n = self.n as f64;
        LossReport {
            critic1: self.sum.critic1 / n,
            critic2: self.sum.critic2 / n,
            actor: self.sum.actor / n,
            alpha: 0.0,
            entropy: self.sum.entropy / n,
        }
    }
}

pub fn checkpoint_dir(out: &Path, episode: usize) -> PathBuf {
    out.join("checkpoints").join(format!("ep{episode:05}"))
}

/// Trains from scratch and writes into `out`:
/// `learning_curve.csv`, `checkpoints/epNNNNN/`, `final/` and `train.json`.
/// `progress` sees every finished episode.
pub fn train(
    scenario: &ScenarioConfig,
    seed: u64,
    preset: Option<Preset>,
    out: &Path,
    progress: &mut dyn FnMut(&EpisodeRecord),
) -> Result<TrainManifest> {
    let mut sc = scenario.clone();
    if let Some(p) = preset {
        p.apply(&mut sc);
    }
    sc.validate()?;
    if sc.episode.episodes == 0 {
        return Err(Error::Config("episode.episodes must be >= 1".into()));
    }
    fs::create_dir_all(out)?;

    let mut agent = SacAgent::new(STATE_DIM, sc.sac.clone(), seed)?;
    let mut buffer = ReplayBuffer::new(sc.sac.buffer_capacity);
    let mut env = FollowEnv::new(sc.clone(), seed.wrapping_add(1));
    let mut batch_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));

    let mut curve = csv::Writer::from_path(out.join("learning_curve.csv"))?;
    let mut total_steps: u64 = 0;
    let mut checkpoints = Vec::new();
    let every = sc.episode.checkpoint_every;

    for ep in 0..sc.episode.episodes {
        let epsilon = sc.sac.epsilon.at(ep as u32);
        let mut state = env.reset(ep)?.to_vec();
        let mut losses = LossAccumulator::default();
        let (mut ret, mut r_yaw, mut abs_dtheta, mut collisions) = (0.0, 0.0, 0.0, 0);
        let mut steps = 0;
        loop {
            let action = if (total_steps as usize) < sc.sac.warmup_steps {
                agent.random_action()
            } else {
                agent.act(&state, epsilon)?
            };
            let (next, terms, truncated, info) = env.step(action)?;
            let next = next.to_vec();
            buffer.push(Transition {
                state: std::mem::replace(&mut state, next.clone()),
                action,
                reward: terms.total,
                next_state: next,
                // Episodes only end on the step limit, which is not terminal.
                done: false,
            });
            total_steps += 1;
            steps += 1;
            ret += terms.total;
            r_yaw += terms.r_yaw;
            abs_dtheta += info.true_dtheta.degrees().abs();
            collisions += info.collision as usize;

            let ready = total_steps as usize >= sc.sac.warmup_steps
                && buffer.len() >= sc.sac.batch_size;
            if ready && total_steps % sc.sac.update_every as u64 == 0 {
                let batch = buffer.sample(sc.sac.batch_size, &mut batch_rng)?;
                losses.add(&agent.train_step(&batch)?);
            }
            if truncated {
                break;
            }
        }
        let l = losses.mean();
        let rec = EpisodeRecord {
            episode: ep,
            steps,
            ret,
            mean_r_yaw: r_yaw / steps as f64,
            mean_abs_dtheta_deg: abs_dtheta / steps as f64,
            epsilon,
            alpha: agent.alpha(),
            critic1: l.critic1,
            critic2: l.critic2,
            actor: l.actor,
            entropy: l.entropy,
            updates: agent.updates,
            collisions,
        };
        curve.serialize(rec)?;
        curve.flush()?;
        progress(&rec);
        if every > 0 && (ep + 1) % every == 0 && ep + 1 < sc.episode.episodes {
            let dir = checkpoint_dir(out, ep + 1);
            agent.save(&dir)?;
            checkpoints.push(rel(out, &dir));
        }
    }

    let final_dir = out.join("final");
    agent.save(&final_dir)?;
    let manifest = TrainManifest {
        seed,
        preset,
        episodes: sc.episode.episodes,
        total_steps,
        updates: agent.updates,
        final_checkpoint: rel(out, &final_dir),
        checkpoints,
        config: sc,
    };
    let mut f = fs::File::create(out.join("train.json"))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// Reads a learning curve back.
pub fn read_curve(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<EpisodeRecord>, _> = r.deserialize().collect();
    Ok(rows?)
}
