//! JSON scenario files: world geometry, robot and person setup, sensors,
//! planner settings and the training episode schedule.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dwa::DwaConfig;
use crate::error::{Error, Result};
use crate::geom::{Point2D, Pose2D, Velocity2D};
use crate::perception::{CameraModel, NoiseModel};
use crate::sac::SacConfig;
use crate::world::{LidarConfig, Limits, Obstacle, PersonState, RobotState, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub pose: Pose2D,
    #[serde(default = "default_footprint")]
    pub footprint_radius: f64,
    #[serde(default)]
    pub limits: Limits,
}

fn default_footprint() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonConfig {
    /// The first waypoint is the start position.
    pub waypoints: Vec<Point2D>,
    #[serde(default = "default_person_speed")]
    pub speed: f64,
}

fn default_person_speed() -> f64 {
    0.6
}

/// Axis-aligned box of start poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(default = "full_turn")]
    pub heading: [f64; 2],
}

fn full_turn() -> [f64; 2] {
    [-std::f64::consts::PI, std::f64::consts::PI]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub episodes: usize,
    pub reshuffle_period: usize,
    /// Episodes between checkpoints during training; 0 disables them.
    pub checkpoint_every: usize,
    /// Start-pose box; `None` keeps the configured robot pose.
    pub sampler: Option<SamplerBox>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 300,
            episodes: 3300,
            reshuffle_period: 20,
            checkpoint_every: 100,
            sampler: None,
        }
    }
}

/// Per-run perturbation of the start pose during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    pub position: f64,
    pub heading: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            position: 0.1,
            heading: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub robot: RobotConfig,
    pub person: PersonConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub lidar: LidarSettings,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub dwa: DwaConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub jitter: Jitter,
    /// Agent hyperparameters, read by training only.
    #[serde(default)]
    pub sac: SacConfig,
    /// Evaluation length in ticks; by default the person's walking time
    /// plus five seconds.
    #[serde(default)]
    pub eval_steps: Option<usize>,
}

fn default_dt() -> f64 {
    0.1
}

/// Lidar block of the config; the angular span is always a full turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarSettings {
    pub beams: usize,
    pub max_range: f64,
}

impl Default for LidarSettings {
    fn default() -> Self {
        let d = LidarConfig::default();
        Self {
            beams: d.beams,
            max_range: d.max_range,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        let r = &self.robot;
        if !r.pose.x.is_finite() || !r.pose.y.is_finite() || !r.pose.heading.radians().is_finite() {
            return bad("robot.pose must be finite".into());
        }
        if !(r.footprint_radius > 0.0) {
            return bad(format!(
                "robot.footprint_radius must be > 0, got {}",
                r.footprint_radius
            ));
        }
        let l = &r.limits;
        for (name, v) in [
            ("v_max", l.v_max),
            ("omega_max", l.omega_max),
            ("linear_accel", l.linear_accel),
            ("angular_accel", l.angular_accel),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("robot.limits.{name} must be >= 0, got {v}"));
            }
        }
        if self.person.waypoints.is_empty() {
            return bad("person.waypoints must hold at least one point".into());
        }
        if let Some(i) = self.person.waypoints.iter().position(|p| !p.is_finite()) {
            return bad(format!("person.waypoints[{i}] must be finite"));
        }
        if !(self.person.speed >= 0.0) || !self.person.speed.is_finite() {
            return bad(format!("person.speed must be >= 0, got {}", self.person.speed));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let kind = match o {
                Obstacle::Circle { .. } => "circle",
                Obstacle::Segment { .. } => "segment",
            };
            o.validate(&format!("obstacles[{i}].{kind}"))?;
        }
        if self.lidar.beams == 0 || !(self.lidar.max_range > 0.0) {
            return bad("lidar.beams and lidar.max_range must be positive".into());
        }
        self.camera.validate()?;
        if !(self.noise.pixel_std >= 0.0) || !(self.noise.depth_std >= 0.0) {
            return bad("noise standard deviations must be >= 0".into());
        }
        self.dwa.validate(r.footprint_radius)?;
        let e = &self.episode;
        if e.max_steps == 0 || e.reshuffle_period == 0 {
            return bad("episode.max_steps and episode.reshuffle_period must be >= 1".into());
        }
        if let Some(s) = e.sampler {
            for (name, [lo, hi]) in [("x", s.x), ("y", s.y), ("heading", s.heading)] {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return bad(format!("episode.sampler.{name} must be an ordered finite range"));
                }
            }
        }
        if !(self.jitter.position >= 0.0) || !(self.jitter.heading >= 0.0) {
            return bad("jitter must be >= 0".into());
        }
        self.sac.validate()?;
        let start = Pose2D::new(r.pose.x, r.pose.y, r.pose.heading.radians())?;
        if self.obstacles.iter().any(|o| o.distance(start.position()) < r.footprint_radius) {
            return bad("robot.pose starts inside an obstacle".into());
        }
        Ok(())
    }

    pub fn lidar_config(&self) -> LidarConfig {
        LidarConfig {
            beams: self.lidar.beams,
            max_range: self.lidar.max_range,
            ..LidarConfig::default()
        }
    }

    pub fn person_route_length(&self) -> f64 {
        let w = &self.person.waypoints;
        PersonState::route_length(w[0], &w[1..])
    }

    /// Ticks of an evaluation run.
    pub fn eval_ticks(&self) -> usize {
        self.eval_steps.unwrap_or_else(|| {
            let walk = if self.person.speed > 0.0 {
                self.person_route_length() / self.person.speed
            } else {
                0.0
            };
            ((walk + 5.0) / self.dt).ceil() as usize
        })
    }

    /// World at the configured start, with the robot placed at `pose`.
    pub fn world_at(&self, pose: Pose2D) -> WorldState {
        let w = &self.person.waypoints;
        let path = if w.len() > 1 { w[1..].to_vec() } else { w.clone() };
        WorldState {
            robot: RobotState {
                pose,
                velocity: Velocity2D::ZERO,
                footprint_radius: self.robot.footprint_radius,
                limits: self.robot.limits,
            },
            person: PersonState::new(w[0], path, self.person.speed),
            obstacles: Arc::new(self.obstacles.clone()),
            lidar: self.lidar_config(),
            time: 0.0,
            rng_seed: self.seed,
            collided: false,
            collision_count: 0,
        }
    }

    pub fn world(&self) -> WorldState {
        let p = self.robot.pose;
        // Headings in files are not necessarily wrapped.
        let pose = Pose2D::new(p.x, p.y, p.heading.radians()).expect("validated");
        self.world_at(pose)
    }
}

/// Parses and validates a scenario and builds its start world.
pub fn load_world(config_text: &str) -> Result<WorldState> {
    Ok(ScenarioConfig::from_json(config_text)?.world())
}
