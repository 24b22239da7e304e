//! Per-tick control loop for the two drive configurations, and the
//! closed-loop episode runner used for evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dwa::{plan_differential, plan_forward, truncate_goal, DwaPlan, WorldView};
use crate::env::{linear_command, reward, state_at, Normalization, StateVec};
use crate::error::{Error, Result};
use crate::geom::{bearing_error, Angle, Pose2D, Velocity2D};
use crate::perception::{observe, person_visible, update_track, TrackState};
use crate::runlog::LogRow;
use crate::sac::{ActMode, GaussianPolicy};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// `(vx, vy)` from the planner, `ω` from the yaw source.
    Omni,
    /// `vy = 0`; `(vx, ω)` from the differential window with a heading cost.
    Differential,
    /// `vy = 0`; `ω` from the yaw source, `vx` from a forward-only window.
    DiffAgent,
}

impl DriveMode {
    pub fn name(self) -> &'static str {
        match self {
            DriveMode::Omni => "omni",
            DriveMode::Differential => "diff",
            DriveMode::DiffAgent => "diff-agent",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "omni" => Some(DriveMode::Omni),
            "diff" | "differential" => Some(DriveMode::Differential),
            "diff-agent" => Some(DriveMode::DiffAgent),
            _ => None,
        }
    }
}

/// Anything that turns a state into a yaw-rate command.
pub trait YawSource {
    fn yaw(&mut self, state: &StateVec, norm: &Normalization) -> Result<f64>;
}

/// Mean action of a trained policy.
pub struct PolicyYaw<'a>(pub &'a GaussianPolicy);

impl YawSource for PolicyYaw<'_> {
    fn yaw(&mut self, state: &StateVec, _norm: &Normalization) -> Result<f64> {
        // Deterministic mode never touches the generator.
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.0.act(&state.to_vec(), ActMode::Deterministic, 0.0, &mut unused)
    }
}

/// `ω = gain·Δθ`, a hand-tuned reference for tests and planner checks.
pub struct ProportionalYaw {
    pub gain: f64,
}

impl YawSource for ProportionalYaw {
    fn yaw(&mut self, state: &StateVec, norm: &Normalization) -> Result<f64> {
        let (_, dtheta, _) = state.to_raw(norm);
        Ok(self.gain * dtheta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickCommand {
    pub command: Velocity2D,
    pub plan: DwaPlan,
}

/// One control decision. The returned command is clamped to the platform
/// limits; in the differential modes `vy` is exactly zero.
pub fn control_tick(
    view: &WorldView,
    track: &TrackState,
    mode: DriveMode,
    yaw: &mut dyn YawSource,
    scenario: &ScenarioConfig,
    omega_prev: f64,
    norm: &Normalization,
) -> Result<TickCommand> {
    let limits = &scenario.robot.limits;
    let goal = track.goal_estimate().ok_or(Error::NoGoal)?;
    let agent_omega = |yaw: &mut dyn YawSource| -> Result<f64> {
        let state = state_at(&view.pose, track, omega_prev, norm)?;
        let w = yaw.yaw(&state, norm)?;
        if !w.is_finite() {
            return Err(Error::NonFinite("yaw command"));
        }
        Ok(w.clamp(-limits.omega_max, limits.omega_max))
    };
    let plan = match mode {
        DriveMode::Omni => {
            let omega = agent_omega(yaw)?;
            linear_command(view, track, omega, scenario)?
        }
        DriveMode::Differential => {
            let target = truncate_goal(view.pose.position(), goal, scenario.dwa.standoff);
            plan_differential(view, target, goal, &scenario.dwa, scenario.dt)?
        }
        DriveMode::DiffAgent => {
            let omega = agent_omega(yaw)?;
            let target = truncate_goal(view.pose.position(), goal, scenario.dwa.standoff);
            plan_forward(view, target, omega, &scenario.dwa, scenario.dt)?
        }
    };
    let mut command = limits.clamp(plan.command);
    if mode != DriveMode::Omni {
        command.vy = 0.0;
    }
    Ok(TickCommand { command, plan })
}

/// Start pose of evaluation run `seed`: the configured pose plus jitter.
pub fn jittered_start(scenario: &ScenarioConfig, seed: u64) -> Result<Pose2D> {
    let base = scenario.world().robot.pose;
    let j = scenario.jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = scenario.world();
    for _ in 0..100 {
        let mut off = |s: f64| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 };
        let (dx, dy, dh) = (off(j.position), off(j.position), off(j.heading));
        let pose = Pose2D::new(base.x + dx, base.y + dy, base.heading.radians() + dh)?;
        if !world.footprint_collides(pose.position()) {
            return Ok(pose);
        }
    }
    Ok(base)
}

/// Runs one closed-loop evaluation episode and returns its log, one row per
/// tick after the command is applied.
pub fn run_episode(
    scenario: &ScenarioConfig,
    mode: DriveMode,
    yaw: &mut dyn YawSource,
    seed: u64,
    ticks: usize,
) -> Result<Vec<LogRow>> {
    let norm = Normalization::default();
    let mut world = scenario.world_at(jittered_start(scenario, seed)?);
    let mut track = TrackState::seeded(world.person.position, 0.0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_a5a5_a5a5_a5a5);
    let mut omega_prev = 0.0;
    let mut scan = world.scan();
    let mut rows = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        let view = WorldView {
            pose: world.robot.pose,
            scan: &scan,
            velocity: world.robot.velocity,
        };
        let tick = control_tick(&view, &track, mode, yaw, scenario, omega_prev, &norm)?;
        let cmd = tick.command;
        world.step(cmd, scenario.dt)?;
        scan = world.scan();
        let det = observe(&world, &scenario.camera, &scenario.noise, &mut noise_rng);
        track = update_track(&track, det.as_ref(), &world.robot.pose, &scenario.camera, world.time);
        let dtheta = bearing_error(&world.robot.pose, world.person.position).unwrap_or(Angle::ZERO);
        let terms = reward(dtheta, omega_prev, cmd.omega);
        let goal = track.goal_estimate().expect("seeded track keeps a goal");
        rows.push(LogRow {
            t: world.time,
            robot_x: world.robot.pose.x,
            robot_y: world.robot.pose.y,
            robot_heading: world.robot.pose.heading.radians(),
            person_x: world.person.position.x,
            person_y: world.person.position.y,
            goal_x: goal.x,
            goal_y: goal.y,
            dtheta_deg: dtheta.degrees(),
            vx: cmd.vx,
            vy: cmd.vy,
            omega: cmd.omega,
            visible: person_visible(&world, &scenario.camera),
            tracked: track.is_tracked(),
            collision: world.collided,
            r_yaw: terms.r_yaw,
            r_smooth: terms.r_smooth,
            reward: terms.total,
            blocked: tick.plan.blocked,
            admissible: tick.plan.admissible,
            min_clearance: tick.plan.min_clearance,
        });
        omega_prev = cmd.omega;
    }
    Ok(rows)
}
