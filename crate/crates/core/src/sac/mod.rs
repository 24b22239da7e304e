//! Soft Actor-Critic for the yaw-rate agent: a squashed Gaussian actor, twin
//! Q critics with Polyak-averaged targets, an entropy temperature, and an
//! ε-greedy overlay on top of the policy's own sampling.

mod policy;
mod replay;

use std::fs;
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{load_weights, save_weights, Activation, AdamConfig, AdamState, Gradients, Mlp};

pub use policy::{normal_log_pdf, ActMode, GaussianPolicy, SquashedSample, LOG_STD_MAX, LOG_STD_MIN};
pub use replay::{Batch, ReplayBuffer, Transition};

/// Geometric decay of the random-action probability, floored at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub min: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            decay: 0.992,
            min: 0.05,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, episode: u32) -> f64 {
        (self.start * self.decay.powi(episode as i32)).max(self.min)
    }
}

/// Free-function form of [`EpsilonSchedule::at`].
pub fn epsilon_at(schedule: &EpsilonSchedule, episode: u32) -> f64 {
    schedule.at(episode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Fixed(f64),
    Auto { target_entropy: f64, initial: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    pub alpha_mode: AlphaMode,
    pub epsilon: EpsilonSchedule,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub action_low: f64,
    pub action_high: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 2e-4,
            batch_size: 256,
            buffer_capacity: 100_000,
            warmup_steps: 1_000,
            update_every: 1,
            alpha_mode: AlphaMode::Auto {
                target_entropy: -1.0,
                initial: 1.0,
            },
            epsilon: EpsilonSchedule::default(),
            hidden: vec![512, 256, 256],
            activation: Activation::Relu,
            action_low: -1.0,
            action_high: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("sac.gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("sac.tau must be in (0, 1], got {}", self.tau));
        }
        let e = &self.epsilon;
        for (name, v) in [("start", e.start), ("decay", e.decay), ("min", e.min)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("sac.epsilon.{name} must be in [0, 1], got {v}"));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("sac.batch_size must be positive and fit in the buffer".into());
        }
        if self.update_every == 0 {
            return bad("sac.update_every must be >= 1".into());
        }
        if !(self.lr >= 0.0) {
            return bad(format!("sac.lr must be >= 0, got {}", self.lr));
        }
        if !(self.action_low < self.action_high) {
            return bad("sac action bounds are empty".into());
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub alpha: f64,
    pub entropy: f64,
}

/// Q-network over the concatenated `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QCritic {
    pub net: Mlp,
}

impl QCritic {
    pub fn value(&self, states: ArrayView2<f64>, actions: ArrayView1<f64>) -> Result<Array1<f64>> {
        let input = state_action(states, actions);
        Ok(self.net.predict(input.view())?.column(0).to_owned())
    }
}

fn state_action(states: ArrayView2<f64>, actions: ArrayView1<f64>) -> Array2<f64> {
    let a = actions.insert_axis(Axis(1));
    concatenate(Axis(1), &[states, a]).expect("row counts match")
}

pub struct SacAgent {
    pub config: SacConfig,
    pub policy: GaussianPolicy,
    pub q1: QCritic,
    pub q2: QCritic,
    pub q1_target: QCritic,
    pub q2_target: QCritic,
    pub log_alpha: f64,
    adam_actor: AdamState,
    adam_q1: AdamState,
    adam_q2: AdamState,
    adam_alpha: AdamState,
    rng: ChaCha8Rng,
    pub updates: u64,
}

/// One supervised regression step of a critic toward `targets`.
fn fit_critic(
    q: &mut QCritic,
    adam: &mut AdamState,
    input: ArrayView2<f64>,
    targets: &Array1<f64>,
) -> Result<f64> {
    let n = targets.len() as f64;
    let (out, cache) = q.net.forward_batch(input)?;
    let diff = &out.column(0) - targets;
    let loss = 0.5 * diff.mapv(|d| d * d).sum() / n;
    let grad = (diff / n).insert_axis(Axis(1));
    let (g, _) = q.net.backward(&cache, grad.view())?;
    adam.step_net(&mut q.net, &g)?;
    Ok(loss)
}

impl SacAgent {
    pub fn new(state_dim: usize, config: SacConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = GaussianPolicy::new(
            state_dim,
            &config.hidden,
            config.activation,
            config.action_low,
            config.action_high,
            &mut rng,
        )?;
        let mut critic_sizes = vec![state_dim + 1];
        critic_sizes.extend_from_slice(&config.hidden);
        critic_sizes.push(1);
        let q1 = QCritic {
            net: Mlp::new(&critic_sizes, config.activation, &mut rng)?,
        };
        let q2 = QCritic {
            net: Mlp::new(&critic_sizes, config.activation, &mut rng)?,
        };
        let log_alpha = match config.alpha_mode {
            AlphaMode::Fixed(a) => a.ln(),
            AlphaMode::Auto { initial, .. } => initial.ln(),
        };
        let adam = config.adam();
        Ok(Self {
            adam_actor: AdamState::for_net(&policy.backbone, adam),
            adam_q1: AdamState::for_net(&q1.net, adam),
            adam_q2: AdamState::for_net(&q2.net, adam),
            adam_alpha: AdamState::new(1, adam),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_alpha,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed),
            updates: 0,
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn state_dim(&self) -> usize {
        self.policy.state_dim()
    }

    /// Exploration action from the agent's own generator: a stochastic
    /// policy sample, replaced by a uniform draw with probability `epsilon`.
    pub fn act(&mut self, state: &[f64], epsilon: f64) -> Result<f64> {
        self.policy.act(state, ActMode::Stochastic, epsilon, &mut self.rng)
    }

    /// Uniform action over the bounds, used during warmup.
    pub fn random_action(&mut self) -> f64 {
        use rand::Rng;
        self.rng.random_range(self.config.action_low..=self.config.action_high)
    }

    fn noise(&mut self, n: usize) -> Array1<f64> {
        Array1::from_iter((0..n).map(|_| StandardNormal.sample(&mut self.rng)))
    }

    /// Soft Bellman targets `r + γ(1−done)(min Q'(s',a') − α·log π(a'|s'))`.
    pub fn critic_targets(&self, batch: &Batch, next_noise: &Array1<f64>) -> Result<Array1<f64>> {
        let alpha = self.alpha();
        let raw = self.policy.backbone.predict(batch.next_states.view())?;
        let next = self.policy.sample_with_noise(&raw, next_noise);
        let q1 = self.q1_target.value(batch.next_states.view(), next.actions.view())?;
        let q2 = self.q2_target.value(batch.next_states.view(), next.actions.view())?;
        let gamma = self.config.gamma;
        Ok(Array1::from_iter((0..batch.len()).map(|i| {
            let soft = q1[i].min(q2[i]) - alpha * next.log_probs[i];
            batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * soft
        })))
    }

    /// Actor objective `mean(α·log π(a|s) − min Q(s,a))` with reparameterized
    /// actions from `noise`, and its gradient with respect to the actor.
    pub fn actor_loss_and_grad(
        &self,
        states: ArrayView2<f64>,
        noise: &Array1<f64>,
        alpha: f64,
    ) -> Result<(f64, Gradients, SquashedSample)> {
        let n = states.nrows();
        let nf = n as f64;
        let (raw, cache) = self.policy.backbone.forward_batch(states)?;
        let sample = self.policy.sample_with_noise(&raw, noise);
        let input = state_action(states, sample.actions.view());
        let (o1, c1) = self.q1.net.forward_batch(input.view())?;
        let (o2, c2) = self.q2.net.forward_batch(input.view())?;

        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        let mut loss = 0.0;
        for i in 0..n {
            let (q, g) = if o1[[i, 0]] <= o2[[i, 0]] {
                (o1[[i, 0]], &mut g1)
            } else {
                (o2[[i, 0]], &mut g2)
            };
            g[[i, 0]] = -1.0 / nf;
            loss += (alpha * sample.log_probs[i] - q) / nf;
        }
        let a_col = states.ncols();
        let d1 = self.q1.net.input_gradient(&c1, g1.view())?;
        let d2 = self.q2.net.input_gradient(&c2, g2.view())?;

        let scale = self.policy.scale();
        let mut out_grad = Array2::zeros((n, 2));
        for i in 0..n {
            let t = sample.pre_squash[i].tanh();
            let dj_da = d1[[i, a_col]] + d2[[i, a_col]];
            let dj_du = alpha * 2.0 * t / nf + dj_da * scale * (1.0 - t * t);
            out_grad[[i, 0]] = dj_du;
            if sample.log_std_active[i] {
                out_grad[[i, 1]] = dj_du * sample.std[i] * sample.noise[i] - alpha / nf;
            }
        }
        let (grads, _) = self.policy.backbone.backward(&cache, out_grad.view())?;
        Ok((loss, grads, sample))
    }

    /// One SAC update on `batch`.
    pub fn train_step(&mut self, batch: &Batch) -> Result<LossReport> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer { have: 0, need: 1 });
        }
        if batch.states.ncols() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "batch states have {} features, agent expects {}",
                batch.states.ncols(),
                self.state_dim()
            )));
        }
        let n = batch.len();
        let alpha = self.alpha();

        let next_noise = self.noise(n);
        let targets = self.critic_targets(batch, &next_noise)?;
        let input = state_action(batch.states.view(), batch.actions.view());
        let critic1 = fit_critic(&mut self.q1, &mut self.adam_q1, input.view(), &targets)?;
        let critic2 = fit_critic(&mut self.q2, &mut self.adam_q2, input.view(), &targets)?;

        let noise = self.noise(n);
        let (actor, grads, sample) = self.actor_loss_and_grad(batch.states.view(), &noise, alpha)?;
        self.adam_actor.step_net(&mut self.policy.backbone, &grads)?;

        let mean_log_prob = sample.log_probs.mean().unwrap_or(0.0);
        if let AlphaMode::Auto { target_entropy, .. } = self.config.alpha_mode {
            let grad = -(mean_log_prob + target_entropy);
            let mut p = [self.log_alpha];
            self.adam_alpha.step_slice(&mut p, &[grad])?;
            self.log_alpha = p[0];
        }

        let tau = self.config.tau;
        self.q1_target.net.polyak_update(&self.q1.net, tau)?;
        self.q2_target.net.polyak_update(&self.q2.net, tau)?;
        self.updates += 1;

        Ok(LossReport {
            critic1,
            critic2,
            actor,
            alpha: self.alpha(),
            entropy: -mean_log_prob,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let nets: [(&str, &Mlp, Option<&AdamState>); 5] = [
            ("actor", &self.policy.backbone, Some(&self.adam_actor)),
            ("critic1", &self.q1.net, Some(&self.adam_q1)),
            ("critic2", &self.q2.net, Some(&self.adam_q2)),
            ("critic1_target", &self.q1_target.net, None),
            ("critic2_target", &self.q2_target.net, None),
        ];
        for (name, net, adam) in nets {
            fs::write(dir.join(format!("{name}.rldwa")), save_weights(net))?;
            if let Some(adam) = adam {
                let mut moment = net.clone();
                moment.set_flat_params(&adam.first_moment)?;
                fs::write(dir.join(format!("{name}.adam_m.rldwa")), save_weights(&moment))?;
                moment.set_flat_params(&adam.second_moment)?;
                fs::write(dir.join(format!("{name}.adam_v.rldwa")), save_weights(&moment))?;
            }
        }
        let meta = AgentMeta {
            format: 1,
            state_dim: self.state_dim(),
            config: self.config.clone(),
            log_alpha: self.log_alpha,
            updates: self.updates,
            adam_steps: [
                self.adam_actor.step_count,
                self.adam_q1.step_count,
                self.adam_q2.step_count,
            ],
            alpha_adam: [
                self.adam_alpha.first_moment[0],
                self.adam_alpha.second_moment[0],
                self.adam_alpha.step_count as f64,
            ],
        };
        fs::write(dir.join("agent.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, seed: u64) -> Result<Self> {
        let meta: AgentMeta = serde_json::from_str(&fs::read_to_string(dir.join("agent.json"))?)?;
        let mut agent = SacAgent::new(meta.state_dim, meta.config, seed)?;
        let read = |name: &str| -> Result<Mlp> {
            let net = load_weights(&fs::read(dir.join(format!("{name}.rldwa")))?)?;
            Ok(net)
        };
        let expect_same = |loaded: Mlp, like: &Mlp, name: &str| -> Result<Mlp> {
            if loaded.sizes() != like.sizes() {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, config implies {:?}",
                    loaded.sizes(),
                    like.sizes()
                )));
            }
            Ok(loaded)
        };
        agent.policy.backbone = expect_same(read("actor")?, &agent.policy.backbone, "actor")?;
        agent.q1.net = expect_same(read("critic1")?, &agent.q1.net, "critic1")?;
        agent.q2.net = expect_same(read("critic2")?, &agent.q2.net, "critic2")?;
        agent.q1_target.net = expect_same(read("critic1_target")?, &agent.q1.net, "critic1_target")?;
        agent.q2_target.net = expect_same(read("critic2_target")?, &agent.q2.net, "critic2_target")?;
        let adams = [
            ("actor", &mut agent.adam_actor, meta.adam_steps[0]),
            ("critic1", &mut agent.adam_q1, meta.adam_steps[1]),
            ("critic2", &mut agent.adam_q2, meta.adam_steps[2]),
        ];
        for (name, adam, steps) in adams {
            adam.first_moment = read(&format!("{name}.adam_m"))?.flat_params();
            adam.second_moment = read(&format!("{name}.adam_v"))?.flat_params();
            adam.step_count = steps;
        }
        agent.adam_alpha.first_moment[0] = meta.alpha_adam[0];
        agent.adam_alpha.second_moment[0] = meta.alpha_adam[1];
        agent.adam_alpha.step_count = meta.alpha_adam[2] as u64;
        agent.log_alpha = meta.log_alpha;
        agent.updates = meta.updates;
        Ok(agent)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentMeta {
    format: u32,
    state_dim: usize,
    config: SacConfig,
    log_alpha: f64,
    updates: u64,
    adam_steps: [u64; 3],
    alpha_adam: [f64; 3],
}

/// Loads only the actor from a checkpoint directory (or a bare actor file)
/// and checks it has the expected input width.
pub fn load_policy(path: &Path, state_dim: usize) -> Result<GaussianPolicy> {
    let (file, bounds) = if path.is_dir() {
        let meta: AgentMeta =
            serde_json::from_str(&fs::read_to_string(path.join("agent.json"))?)?;
        (
            path.join("actor.rldwa"),
            (meta.config.action_low, meta.config.action_high),
        )
    } else {
        (path.to_path_buf(), (-1.0, 1.0))
    };
    let net = load_weights(&fs::read(&file)?)?;
    if net.input_dim() != state_dim || net.output_dim() != 2 {
        return Err(Error::Checkpoint(format!(
            "actor maps {} -> {}, expected {state_dim} -> 2",
            net.input_dim(),
            net.output_dim()
        )));
    }
    GaussianPolicy::from_backbone(net, bounds.0, bounds.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SacConfig {
        SacConfig {
            hidden: vec![16, 16],
            batch_size: 8,
            buffer_capacity: 64,
            ..SacConfig::default()
        }
    }

    fn transition(done: bool, reward: f64) -> Transition {
        Transition {
            state: vec![0.2, -0.1, 0.3],
            action: 0.4,
            reward,
            next_state: vec![0.5, 0.5, -0.5],
            done,
        }
    }

    #[test]
    fn epsilon_examples() {
        let s = EpsilonSchedule::default();
        assert_eq!(epsilon_at(&s, 0), 1.0);
        assert!((s.at(100) - 0.992f64.powi(100)).abs() < 1e-12);
        assert!((s.at(100) - 0.4479).abs() < 1e-4);
        assert_eq!(s.at(375), 0.05);
        assert!(s.at(372) > 0.05);
        assert_eq!(s.at(373), 0.05);
    }

    #[test]
    fn done_transition_target_is_reward() {
        let agent = SacAgent::new(3, small_config(), 1).unwrap();
        let t = transition(true, 0.7);
        let batch = Batch::from_transitions(&[&t, &t]).unwrap();
        let y = agent.critic_targets(&batch, &Array1::from(vec![0.3, -1.0])).unwrap();
        assert_eq!(y.to_vec(), vec![0.7, 0.7]);
    }

    #[test]
    fn gamma_zero_ignores_next_state() {
        let cfg = SacConfig { gamma: 0.0, ..small_config() };
        let agent = SacAgent::new(3, cfg, 1).unwrap();
        let t = transition(false, -0.25);
        let batch = Batch::from_transitions(&[&t]).unwrap();
        assert_eq!(agent.critic_targets(&batch, &Array1::from(vec![0.9])).unwrap()[0], -0.25);
    }

    #[test]
    fn train_step_errors_on_empty_or_mismatched_batch() {
        let mut agent = SacAgent::new(3, small_config(), 1).unwrap();
        let t = Transition { state: vec![0.0; 4], next_state: vec![0.0; 4], ..transition(false, 0.0) };
        let batch = Batch::from_transitions(&[&t]).unwrap();
        assert!(agent.train_step(&batch).is_err());
        assert!(Batch::from_transitions(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SacConfig { gamma: 1.0, ..SacConfig::default() }.validate().is_err());
        assert!(SacConfig { tau: 0.0, ..SacConfig::default() }.validate().is_err());
        let eps = EpsilonSchedule { start: 1.5, ..EpsilonSchedule::default() };
        assert!(SacConfig { epsilon: eps, ..SacConfig::default() }.validate().is_err());
        assert!(SacConfig::default().validate().is_ok());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut agent = SacAgent::new(3, small_config(), 42).unwrap();
            let mut buf = ReplayBuffer::new(64);
            for i in 0..32 {
                let x = i as f64 / 32.0;
                buf.push(Transition {
                    state: vec![x, -x, 0.5],
                    action: (x - 0.5).clamp(-0.9, 0.9),
                    reward: 1.0 - x,
                    next_state: vec![x * 0.9, 0.1, -0.2],
                    done: false,
                });
            }
            let mut r = ChaCha8Rng::seed_from_u64(9);
            let mut last = LossReport::default();
            for _ in 0..20 {
                last = agent.train_step(&buf.sample(8, &mut r).unwrap()).unwrap();
            }
            (last, agent.policy.backbone.flat_params())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut agent = SacAgent::new(3, small_config(), 3).unwrap();
        let t = transition(false, 0.5);
        let batch = Batch::from_transitions(&[&t, &t, &t]).unwrap();
        agent.train_step(&batch).unwrap();
        agent.save(dir.path()).unwrap();
        let loaded = SacAgent::load(dir.path(), 3).unwrap();
        assert_eq!(loaded.updates, 1);
        assert_eq!(loaded.log_alpha, agent.log_alpha);
        for (a, b) in agent.policy.backbone.flat_params().iter().zip(loaded.policy.backbone.flat_params()) {
            assert_eq!(*a as f32 as f64, b);
        }
        let p = load_policy(dir.path(), 3).unwrap();
        assert_eq!(p.backbone.flat_params(), loaded.policy.backbone.flat_params());
        assert!(load_policy(dir.path(), 4).is_err());
    }
}
