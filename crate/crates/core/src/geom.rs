//! Planar geometry: wrapped angles, poses, body-frame twists and the
//! camera-to-world conversion used by the perception stub.
//!
//! Angles are counter-clockwise positive and live in (−π, π], so a target on
//! the robot's left yields a positive bearing error.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angle in radians, always wrapped to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(pub(crate) f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps a finite angle into (−π, π].
    pub fn wrap(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("angle"));
        }
        Ok(Angle(wrap_radians(theta)))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

/// Free-function form of [`Angle::wrap`].
pub fn wrap_angle(theta: f64) -> Result<Angle> {
    Angle::wrap(theta)
}

/// Raw wrapping on `f64`; callers guarantee finiteness.
pub(crate) fn wrap_radians(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2D) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2D) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn scale(self, k: f64) -> Point2D {
        Point2D::new(self.x * k, self.y * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2D {
    type Output = Point2D;
    fn add(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2D {
    type Output = Point2D;
    fn sub(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x - rhs.x, self.y - rhs.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: Angle,
}

impl Pose2D {
    /// Builds a pose, wrapping the heading.
    pub fn new(x: f64, y: f64, heading: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("pose position"));
        }
        Ok(Self {
            x,
            y,
            heading: Angle::wrap(heading)?,
        })
    }

    pub fn position(&self) -> Point2D {
        Point2D::new(self.x, self.y)
    }

    /// Expresses a world point in this pose's body frame.
    pub fn to_body(&self, p: Point2D) -> Point2D {
        let (s, c) = self.heading.radians().sin_cos();
        let d = p - self.position();
        Point2D::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Maps a body-frame point to the world frame.
    pub fn to_world(&self, p: Point2D) -> Point2D {
        let (s, c) = self.heading.radians().sin_cos();
        Point2D::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }
}

/// Body-frame twist: `vx` forward, `vy` left, `omega` counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Velocity2D {
    pub const ZERO: Velocity2D = Velocity2D {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// One Euler step of the body twist: the linear part is rotated by the
/// pre-step heading, then the heading advances by `omega·dt`.
///
/// Shared by the simulator and the planner rollouts so both agree bit for bit.
pub fn integrate_pose(pose: &Pose2D, cmd: &Velocity2D, dt: f64) -> Pose2D {
    let (s, c) = pose.heading.radians().sin_cos();
    Pose2D {
        x: pose.x + (cmd.vx * c - cmd.vy * s) * dt,
        y: pose.y + (cmd.vx * s + cmd.vy * c) * dt,
        heading: Angle(wrap_radians(pose.heading.radians() + cmd.omega * dt)),
    }
}

/// Signed angle from the robot heading to the ray robot→target.
pub fn bearing_error(robot: &Pose2D, target: Point2D) -> Result<Angle> {
    let d = target - robot.position();
    if !d.is_finite() {
        return Err(Error::NonFinite("bearing target"));
    }
    if d.norm() < 1e-12 {
        return Err(Error::CoincidentPoints);
    }
    Angle::wrap(d.y.atan2(d.x) - robot.heading.radians())
}

/// Places a range/bearing observation taken from `robot` into the world.
pub fn camera_to_world(robot: &Pose2D, bearing: Angle, range: f64) -> Result<Point2D> {
    if !range.is_finite() {
        return Err(Error::NonFinite("range"));
    }
    if range <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "range must be positive, got {range}"
        )));
    }
    let direction = robot.heading.radians() + bearing.radians();
    Ok(Point2D::new(
        robot.x + range * direction.cos(),
        robot.y + range * direction.sin(),
    ))
}
