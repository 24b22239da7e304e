//! Geometric stand-in for the camera detection pipeline.
//!
//! A detection is the pixel column of the person's center, a nominal row, and
//! the depth at that pixel. It exists only when the person is inside the
//! horizontal field of view, within depth range, and not occluded. A single
//! target track holds the last world-frame fix while the person is unseen.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bearing_error, camera_to_world, Angle, Point2D, Pose2D};
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub hfov: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub max_depth: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            hfov: 69f64.to_radians(),
            image_width: 640.0,
            image_height: 480.0,
            max_depth: 6.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.hfov > 0.0 && self.hfov < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "camera.hfov must be in (0, pi), got {}",
                self.hfov
            )));
        }
        if !(self.image_width > 0.0) || !(self.image_height > 0.0) {
            return Err(Error::Config("camera image size must be positive".into()));
        }
        if !(self.max_depth > 0.0) {
            return Err(Error::Config(format!(
                "camera.max_depth must be > 0, got {}",
                self.max_depth
            )));
        }
        Ok(())
    }

    /// Pinhole column for a bearing (positive = left of the optical axis).
    pub fn project(&self, bearing: f64) -> f64 {
        0.5 * self.image_width * (1.0 - bearing.tan() / (0.5 * self.hfov).tan())
    }

    /// Inverse of [`CameraModel::project`].
    pub fn unproject(&self, x_c: f64) -> f64 {
        ((1.0 - 2.0 * x_c / self.image_width) * (0.5 * self.hfov).tan()).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub pixel_std: f64,
    pub depth_std: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_std: 4.0,
            depth_std: 0.03,
        }
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        pixel_std: 0.0,
        depth_std: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonDetection {
    pub x_c: f64,
    pub y_c: f64,
    pub d_c: f64,
    pub timestamp: f64,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std)
            .expect("finite positive std")
            .sample(rng)
    } else {
        0.0
    }
}

/// Whether the camera can currently see the person, ignoring noise.
pub fn person_visible(world: &WorldState, cam: &CameraModel) -> bool {
    let robot = world.robot.pose;
    let person = world.person.position;
    let Ok(bearing) = bearing_error(&robot, person) else {
        return false;
    };
    bearing.radians().abs() <= 0.5 * cam.hfov
        && world.person_distance() <= cam.max_depth
        && world.line_of_sight(robot.position(), person)
}

/// Simulated detection of the person, or `None` when it is out of view.
pub fn observe<R: Rng + ?Sized>(
    world: &WorldState,
    cam: &CameraModel,
    noise: &NoiseModel,
    rng: &mut R,
) -> Option<PersonDetection> {
    if !person_visible(world, cam) {
        return None;
    }
    let bearing = bearing_error(&world.robot.pose, world.person.position)
        .ok()?
        .radians();
    let x_c = (cam.project(bearing) + gaussian(rng, noise.pixel_std))
        .clamp(0.0, cam.image_width * (1.0 - f64::EPSILON));
    let y_c = (0.5 * cam.image_height + gaussian(rng, noise.pixel_std))
        .clamp(0.0, cam.image_height * (1.0 - f64::EPSILON));
    let d_c = (world.person_distance() + gaussian(rng, noise.depth_std)).clamp(1e-3, cam.max_depth);
    Some(PersonDetection {
        x_c,
        y_c,
        d_c,
        timestamp: world.time,
    })
}

/// Back-projects a detection to a world point.
pub fn detection_to_point(
    robot: &Pose2D,
    cam: &CameraModel,
    det: &PersonDetection,
) -> Result<Point2D> {
    if !(0.0..=cam.image_width).contains(&det.x_c) {
        return Err(Error::InvalidArgument(format!(
            "x_c {} outside image [0, {}]",
            det.x_c, cam.image_width
        )));
    }
    let bearing = Angle::wrap(cam.unproject(det.x_c))?;
    camera_to_world(robot, bearing, det.d_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TrackStatus {
    Tracked,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    goal_estimate: Option<Point2D>,
    pub last_seen: f64,
    pub status: TrackStatus,
}

impl Default for TrackState {
    fn default() -> Self {
        Self::new()
    }
}

impl TrackState {
    /// A track that has never seen the person.
    pub fn new() -> Self {
        Self {
            goal_estimate: None,
            last_seen: 0.0,
            status: TrackStatus::Lost,
        }
    }

    /// A track seeded with a known position, as when the person is
    /// registered at the start of a run.
    pub fn seeded(position: Point2D, now: f64) -> Self {
        Self {
            goal_estimate: Some(position),
            last_seen: now,
            status: TrackStatus::Tracked,
        }
    }

    pub fn goal_estimate(&self) -> Option<Point2D> {
        self.goal_estimate
    }

    pub fn is_tracked(&self) -> bool {
        self.status == TrackStatus::Tracked
    }
}

/// Folds one frame into the track. Without a detection the last fix is held.
pub fn update_track(
    track: &TrackState,
    det: Option<&PersonDetection>,
    robot: &Pose2D,
    cam: &CameraModel,
    now: f64,
) -> TrackState {
    let fix = det.and_then(|d| detection_to_point(robot, cam, d).ok());
    match fix {
        Some(p) if p.is_finite() => TrackState {
            goal_estimate: Some(p),
            last_seen: now,
            status: TrackStatus::Tracked,
        },
        _ => TrackState {
            status: TrackStatus::Lost,
            ..*track
        },
    }
}
