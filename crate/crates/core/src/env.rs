//! The following task as an MDP: a three-feature state, the shaped yaw
//! reward, and episodes with periodic start-pose reshuffling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dwa::{plan, truncate_goal, DwaPlan, WorldView};
use crate::error::{Error, Result};
use crate::geom::{bearing_error, Angle, Point2D, Pose2D, Velocity2D};
use crate::perception::{observe, person_visible, update_track, TrackState};
use crate::scenario::{SamplerBox, ScenarioConfig};
use crate::world::{LidarScan, WorldState};

pub const STATE_DIM: usize = 3;

/// Feature scaling. With `enabled = false` raw features are passed through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Normalization {
    pub enabled: bool,
    pub d_max: f64,
    pub omega_max: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            enabled: true,
            d_max: 8.0,
            omega_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec {
    pub d_norm: f64,
    pub dtheta_norm: f64,
    pub omega_prev_norm: f64,
}

impl StateVec {
    pub fn from_raw(d: f64, dtheta: Angle, omega_prev: f64, norm: &Normalization) -> Self {
        if norm.enabled {
            Self {
                d_norm: d / norm.d_max,
                dtheta_norm: dtheta.radians() / PI,
                omega_prev_norm: omega_prev / norm.omega_max,
            }
        } else {
            Self {
                d_norm: d,
                dtheta_norm: dtheta.radians(),
                omega_prev_norm: omega_prev,
            }
        }
    }

    /// Recovers `(d, Δθ, ω_prev)` in meters, radians and rad/s.
    pub fn to_raw(&self, norm: &Normalization) -> (f64, f64, f64) {
        if norm.enabled {
            (
                self.d_norm * norm.d_max,
                self.dtheta_norm * PI,
                self.omega_prev_norm * norm.omega_max,
            )
        } else {
            (self.d_norm, self.dtheta_norm, self.omega_prev_norm)
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.d_norm, self.dtheta_norm, self.omega_prev_norm]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub r_yaw: f64,
    pub r_smooth: f64,
    pub total: f64,
}

pub fn reward(dtheta: Angle, omega_prev: f64, omega_now: f64) -> RewardTerms {
    let r_yaw = 1.0 - 2.0 * (dtheta.radians() / PI).abs().sqrt();
    let r_smooth = -(omega_prev - omega_now).abs();
    RewardTerms {
        r_yaw,
        r_smooth,
        total: r_yaw + r_smooth,
    }
}

/// Δθ toward `goal`, zero when the robot stands on it.
fn heading_error(robot: &Pose2D, goal: Point2D) -> Angle {
    bearing_error(robot, goal).unwrap_or(Angle::ZERO)
}

/// State against the tracked goal estimate, never the ground truth.
pub fn observe_state(
    world: &WorldState,
    track: &TrackState,
    omega_prev: f64,
    norm: &Normalization,
) -> Result<StateVec> {
    state_at(&world.robot.pose, track, omega_prev, norm)
}

/// [`observe_state`] for a bare robot pose.
pub fn state_at(
    robot: &Pose2D,
    track: &TrackState,
    omega_prev: f64,
    norm: &Normalization,
) -> Result<StateVec> {
    let goal = track.goal_estimate().ok_or(Error::NoGoal)?;
    Ok(StateVec::from_raw(
        robot.position().distance(goal),
        heading_error(robot, goal),
        omega_prev,
        norm,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    /// Simulator ground truth.
    #[default]
    GroundTruth,
    /// Bearing to the tracked goal estimate.
    Tracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Translation {
    #[default]
    Dwa,
    /// Straight toward the truncated goal at capped speed, no avoidance.
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub collision: bool,
    pub visible: bool,
    pub command: Velocity2D,
    pub plan: Option<DwaPlan>,
    pub true_dtheta: Angle,
}

/// Linear velocities toward the truncated goal with `ω` held at `omega`.
pub fn linear_command(
    view: &WorldView,
    track: &TrackState,
    omega: f64,
    scenario: &ScenarioConfig,
) -> Result<DwaPlan> {
    let goal = track.goal_estimate().ok_or(Error::NoGoal)?;
    let target = truncate_goal(view.pose.position(), goal, scenario.dwa.standoff);
    plan(view, target, omega, &scenario.dwa, scenario.dt)
}

fn scripted_command(world: &WorldState, track: &TrackState, scenario: &ScenarioConfig) -> Result<(f64, f64)> {
    let goal = track.goal_estimate().ok_or(Error::NoGoal)?;
    let pose = world.robot.pose;
    let target = truncate_goal(pose.position(), goal, scenario.dwa.standoff);
    let body = pose.to_body(target);
    let v = world.robot.limits.v_max;
    let k = 1.0 / scenario.dt;
    Ok(((body.x * k).clamp(-v, v), (body.y * k).clamp(-v, v)))
}

pub struct FollowEnv {
    pub scenario: ScenarioConfig,
    pub world: WorldState,
    pub track: TrackState,
    pub omega_prev: f64,
    pub steps: usize,
    pub norm: Normalization,
    pub reward_source: RewardSource,
    pub translation: Translation,
    start_pose: Option<Pose2D>,
    sampler_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    scan: LidarScan,
}

const SAMPLER_ATTEMPTS: usize = 1000;

/// Draws a start pose inside `bx` whose footprint clears every obstacle.
pub fn sample_start<R: Rng + ?Sized>(
    scenario: &ScenarioConfig,
    bx: &SamplerBox,
    rng: &mut R,
) -> Result<Pose2D> {
    let probe = scenario.world();
    let margin = scenario.robot.footprint_radius + 0.1;
    let draw = |rng: &mut R, [lo, hi]: [f64; 2]| if lo < hi { rng.random_range(lo..hi) } else { lo };
    for _ in 0..SAMPLER_ATTEMPTS {
        let x = draw(rng, bx.x);
        let y = draw(rng, bx.y);
        let h = draw(rng, bx.heading);
        let p = Point2D::new(x, y);
        if probe.obstacles.iter().all(|o| o.distance(p) >= margin) {
            return Pose2D::new(x, y, h);
        }
    }
    Err(Error::SamplerExhausted(SAMPLER_ATTEMPTS))
}

impl FollowEnv {
    pub fn new(scenario: ScenarioConfig, seed: u64) -> Self {
        let world = scenario.world();
        let scan = world.scan();
        Self {
            track: TrackState::seeded(world.person.position, 0.0),
            world,
            scenario,
            omega_prev: 0.0,
            steps: 0,
            norm: Normalization::default(),
            reward_source: RewardSource::GroundTruth,
            translation: Translation::Dwa,
            start_pose: None,
            sampler_rng: ChaCha8Rng::seed_from_u64(seed),
            noise_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
            scan,
        }
    }

    pub fn start_pose(&self) -> Option<Pose2D> {
        self.start_pose
    }

    /// Starts episode `episode`. The start pose is redrawn on multiples of
    /// the reshuffle period and reused otherwise; the person always restarts.
    pub fn reset(&mut self, episode: usize) -> Result<StateVec> {
        let period = self.scenario.episode.reshuffle_period;
        if self.start_pose.is_none() || episode % period == 0 {
            let pose = match self.scenario.episode.sampler {
                Some(bx) => sample_start(&self.scenario, &bx, &mut self.sampler_rng)?,
                None => self.scenario.world().robot.pose,
            };
            self.start_pose = Some(pose);
        }
        self.world = self.scenario.world_at(self.start_pose.expect("set above"));
        // The person is registered at the start of every episode.
        self.track = TrackState::seeded(self.world.person.position, 0.0);
        self.omega_prev = 0.0;
        self.steps = 0;
        self.scan = self.world.scan();
        self.state()
    }

    pub fn state(&self) -> Result<StateVec> {
        observe_state(&self.world, &self.track, self.omega_prev, &self.norm)
    }

    pub fn max_steps(&self) -> usize {
        self.scenario.episode.max_steps
    }

    /// Plans the linear velocities for `omega` and steps.
    pub fn step(&mut self, omega: f64) -> Result<(StateVec, RewardTerms, bool, StepInfo)> {
        let (vx, vy, plan) = match self.translation {
            Translation::Dwa => {
                let view = WorldView {
                    pose: self.world.robot.pose,
                    scan: &self.scan,
                    velocity: self.world.robot.velocity,
                };
                let p = linear_command(&view, &self.track, omega, &self.scenario)?;
                (p.command.vx, p.command.vy, Some(p))
            }
            Translation::Scripted => {
                let (vx, vy) = scripted_command(&self.world, &self.track, &self.scenario)?;
                (vx, vy, None)
            }
        };
        let (s, r, done, mut info) = self.step_with_linear(omega, vx, vy)?;
        info.plan = plan;
        Ok((s, r, done, info))
    }

    /// Fuses `[vx, vy, ω]`, advances the world, refreshes the track and
    /// scores the post-step heading error.
    pub fn step_with_linear(
        &mut self,
        omega: f64,
        vx: f64,
        vy: f64,
    ) -> Result<(StateVec, RewardTerms, bool, StepInfo)> {
        if !omega.is_finite() {
            return Err(Error::NonFinite("action"));
        }
        let cmd = self.world.robot.limits.clamp(Velocity2D::new(vx, vy, omega));
        let dt = self.scenario.dt;
        self.world.step(cmd, dt)?;
        self.scan = self.world.scan();
        let det = observe(&self.world, &self.scenario.camera, &self.scenario.noise, &mut self.noise_rng);
        self.track = update_track(
            &self.track,
            det.as_ref(),
            &self.world.robot.pose,
            &self.scenario.camera,
            self.world.time,
        );
        let true_dtheta = heading_error(&self.world.robot.pose, self.world.person.position);
        let scored = match self.reward_source {
            RewardSource::GroundTruth => true_dtheta,
            RewardSource::Tracked => heading_error(
                &self.world.robot.pose,
                self.track.goal_estimate().ok_or(Error::NoGoal)?,
            ),
        };
        let terms = reward(scored, self.omega_prev, cmd.omega);
        self.omega_prev = cmd.omega;
        self.steps += 1;
        let done = self.steps >= self.max_steps();
        let info = StepInfo {
            collision: self.world.collided,
            visible: person_visible(&self.world, &self.scenario.camera),
            command: cmd,
            plan: None,
            true_dtheta,
        };
        Ok((self.state()?, terms, done, info))
    }
}
