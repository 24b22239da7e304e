//! Deterministic 2D world: omnidirectional robot kinematics, a waypoint-driven
//! person, static obstacles, lidar raycasting and line-of-sight queries.
//!
//! The world is plain data. Stepping mutates in place; clone first when a
//! value-style transition is needed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{integrate_pose, Angle, Point2D, Pose2D, Velocity2D};

/// Static obstacle. Segments are capsules of total width `thickness`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Obstacle {
    Circle {
        center: Point2D,
        radius: f64,
    },
    Segment {
        a: Point2D,
        b: Point2D,
        thickness: f64,
    },
}

impl Obstacle {
    /// Signed distance from `p` to the obstacle surface (negative inside).
    pub fn distance(&self, p: Point2D) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => p.distance(center) - radius,
            Obstacle::Segment { a, b, thickness } => {
                point_segment_distance(p, a, b) - 0.5 * thickness
            }
        }
    }

    /// Distance along a unit ray to the first surface hit, if any.
    /// Returns `Some(0.0)` when the origin is inside the obstacle.
    pub fn ray_hit(&self, origin: Point2D, dir: Point2D) -> Option<f64> {
        match *self {
            Obstacle::Circle { center, radius } => ray_circle(origin, dir, center, radius),
            Obstacle::Segment { a, b, thickness } => {
                let h = 0.5 * thickness;
                if h == 0.0 {
                    return ray_segment(origin, dir, a, b);
                }
                if point_segment_distance(origin, a, b) <= h {
                    return Some(0.0);
                }
                let e = b - a;
                let n = Point2D::new(-e.y, e.x).scale(h / e.norm());
                [
                    ray_circle(origin, dir, a, h),
                    ray_circle(origin, dir, b, h),
                    ray_segment(origin, dir, a + n, b + n),
                    ray_segment(origin, dir, a - n, b - n),
                ]
                .into_iter()
                .flatten()
                .reduce(f64::min)
            }
        }
    }

    /// True when the segment `p`–`q` touches the obstacle interior.
    pub fn blocks_segment(&self, p: Point2D, q: Point2D) -> bool {
        match *self {
            Obstacle::Circle { center, radius } => point_segment_distance(center, p, q) < radius,
            Obstacle::Segment { a, b, thickness } => {
                let h = 0.5 * thickness;
                let d = segment_segment_distance(p, q, a, b);
                if h == 0.0 {
                    d <= 1e-12
                } else {
                    d < h
                }
            }
        }
    }

    pub(crate) fn validate(&self, field: &str) -> Result<()> {
        match *self {
            Obstacle::Circle { center, radius } => {
                if !center.is_finite() {
                    return Err(Error::Config(format!("{field}.center must be finite")));
                }
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Config(format!(
                        "{field}.radius must be > 0 (got {radius})"
                    )));
                }
            }
            Obstacle::Segment { a, b, thickness } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Config(format!("{field} endpoints must be finite")));
                }
                if a.distance(b) < 1e-12 {
                    return Err(Error::Config(format!("{field}: a and b must differ")));
                }
                if !(thickness >= 0.0) || !thickness.is_finite() {
                    return Err(Error::Config(format!(
                        "{field}.thickness must be >= 0 (got {thickness})"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn point_segment_distance(p: Point2D, a: Point2D, b: Point2D) -> f64 {
    let e = b - a;
    let len2 = e.dot(e);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    p.distance(a + e.scale(t))
}

fn segments_cross(p: Point2D, q: Point2D, a: Point2D, b: Point2D) -> bool {
    let d1 = (q - p).cross(a - p);
    let d2 = (q - p).cross(b - p);
    let d3 = (b - a).cross(p - a);
    let d4 = (b - a).cross(q - a);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn segment_segment_distance(p: Point2D, q: Point2D, a: Point2D, b: Point2D) -> f64 {
    if segments_cross(p, q, a, b) {
        return 0.0;
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(q, a, b))
        .min(point_segment_distance(a, p, q))
        .min(point_segment_distance(b, p, q))
}

fn ray_circle(origin: Point2D, dir: Point2D, center: Point2D, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = dir.dot(oc);
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_segment(origin: Point2D, dir: Point2D, a: Point2D, b: Point2D) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    let ao = a - origin;
    if denom.abs() < 1e-15 {
        // Collinear: nearest endpoint in front of the ray, if any.
        if ao.cross(dir).abs() > 1e-12 {
            return None;
        }
        let ta = ao.dot(dir);
        let tb = (b - origin).dot(dir);
        return match (ta >= 0.0, tb >= 0.0) {
            (true, true) => Some(ta.min(tb)),
            (false, false) => None,
            _ => Some(0.0),
        };
    }
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
    pub linear_accel: f64,
    pub angular_accel: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 1.0,
            linear_accel: 1.0,
            angular_accel: 2.0,
        }
    }
}

impl Limits {
    /// Hard clamp of every component to the velocity limits.
    pub fn clamp(&self, cmd: Velocity2D) -> Velocity2D {
        Velocity2D::new(
            cmd.vx.clamp(-self.v_max, self.v_max),
            cmd.vy.clamp(-self.v_max, self.v_max),
            cmd.omega.clamp(-self.omega_max, self.omega_max),
        )
    }

    pub fn contains(&self, cmd: &Velocity2D) -> bool {
        cmd.vx.abs() <= self.v_max && cmd.vy.abs() <= self.v_max && cmd.omega.abs() <= self.omega_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose2D,
    pub velocity: Velocity2D,
    pub footprint_radius: f64,
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonState {
    pub position: Point2D,
    /// Waypoints still to visit, in order.
    pub path: Vec<Point2D>,
    pub speed: f64,
    /// Index into `path` of the waypoint currently walked toward.
    pub current_segment_index: usize,
}

impl PersonState {
    pub fn new(start: Point2D, path: Vec<Point2D>, speed: f64) -> Self {
        Self {
            position: start,
            path,
            speed,
            current_segment_index: 0,
        }
    }

    pub fn finished(&self) -> bool {
        self.current_segment_index >= self.path.len()
    }

    /// Length of the remaining route from the start position.
    pub fn route_length(start: Point2D, path: &[Point2D]) -> f64 {
        let mut prev = start;
        let mut total = 0.0;
        for &w in path {
            total += prev.distance(w);
            prev = w;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beams: usize,
    pub max_range: f64,
    pub angle_min: f64,
    pub angle_max: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 360,
            max_range: 8.0,
            angle_min: -std::f64::consts::PI,
            angle_max: std::f64::consts::PI,
        }
    }
}

impl LidarConfig {
    /// Robot-frame angle of each beam. A full turn does not repeat its endpoint.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.beams;
        let span = self.angle_max - self.angle_min;
        let full_turn = (span - std::f64::consts::TAU).abs() < 1e-9;
        let step = if full_turn || n == 1 {
            span / n as f64
        } else {
            span / (n - 1) as f64
        };
        (0..n).map(|i| self.angle_min + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
    /// Robot-frame beam angles, parallel to `ranges`.
    pub angles: Vec<f64>,
}

impl LidarScan {
    /// World-frame hit points for beams that returned before `max_range`.
    pub fn hit_points(&self, pose: &Pose2D) -> Vec<Point2D> {
        self.ranges
            .iter()
            .zip(&self.angles)
            .filter(|(r, _)| **r < self.max_range)
            .map(|(&r, &a)| {
                let th = pose.heading.radians() + a;
                Point2D::new(pose.x + r * th.cos(), pose.y + r * th.sin())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub robot: RobotState,
    pub person: PersonState,
    pub obstacles: Arc<Vec<Obstacle>>,
    pub lidar: LidarConfig,
    pub time: f64,
    pub rng_seed: u64,
    /// Set by the most recent robot step if it was blocked by an obstacle.
    pub collided: bool,
    pub collision_count: u32,
}

impl WorldState {
    /// Integrates the body twist for `dt`. A step that would bring the
    /// footprint into an obstacle keeps the old position but applies the
    /// rotation, and raises the collision flag.
    pub fn step_robot(&mut self, cmd: Velocity2D, dt: f64) -> Result<()> {
        if !cmd.is_finite() {
            return Err(Error::NonFinite("velocity command"));
        }
        check_dt(dt)?;
        let next = integrate_pose(&self.robot.pose, &cmd, dt);
        self.collided = self.footprint_collides(next.position());
        if self.collided {
            self.collision_count += 1;
            self.robot.pose.heading = next.heading;
        } else {
            self.robot.pose = next;
        }
        self.robot.velocity = cmd;
        Ok(())
    }

    /// Walks the person `speed·dt` along the remaining polyline.
    pub fn step_person(&mut self, dt: f64) -> Result<()> {
        check_dt(dt)?;
        let person = &mut self.person;
        if person.path.is_empty() {
            return Err(Error::InvalidArgument("person path is empty".into()));
        }
        let mut remaining = person.speed * dt;
        while remaining > 0.0 && !person.finished() {
            let target = person.path[person.current_segment_index];
            let gap = person.position.distance(target);
            if gap <= remaining {
                remaining -= gap;
                person.position = target;
                person.current_segment_index += 1;
            } else {
                let dir = (target - person.position).scale(1.0 / gap);
                person.position = person.position + dir.scale(remaining);
                remaining = 0.0;
            }
        }
        Ok(())
    }

    /// Advances robot and person by one tick and the clock by `dt`.
    pub fn step(&mut self, cmd: Velocity2D, dt: f64) -> Result<()> {
        self.step_robot(cmd, dt)?;
        self.step_person(dt)?;
        self.time += dt;
        Ok(())
    }

    pub fn footprint_collides(&self, center: Point2D) -> bool {
        let r = self.robot.footprint_radius;
        self.obstacles.iter().any(|o| o.distance(center) < r)
    }

    /// Distance from the robot center to the nearest obstacle surface.
    pub fn clearance(&self) -> f64 {
        let c = self.robot.pose.position();
        self.obstacles
            .iter()
            .map(|o| o.distance(c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn raycast(&self, origin: Point2D, direction: Angle, max_range: f64) -> f64 {
        let (s, c) = direction.radians().sin_cos();
        let dir = Point2D::new(c, s);
        self.obstacles
            .iter()
            .filter_map(|o| o.ray_hit(origin, dir))
            .fold(max_range, f64::min)
            .max(0.0)
    }

    pub fn scan(&self) -> LidarScan {
        let pose = self.robot.pose;
        let angles = self.lidar.beam_angles();
        let ranges = angles
            .iter()
            .map(|&a| {
                let dir = Angle(crate::geom::wrap_radians(pose.heading.radians() + a));
                self.raycast(pose.position(), dir, self.lidar.max_range)
            })
            .collect();
        LidarScan {
            ranges,
            angle_min: self.lidar.angle_min,
            angle_max: self.lidar.angle_max,
            max_range: self.lidar.max_range,
            angles,
        }
    }

    pub fn line_of_sight(&self, a: Point2D, b: Point2D) -> bool {
        !self.obstacles.iter().any(|o| o.blocks_segment(a, b))
    }

    /// Ground-truth bearing error from the robot heading to the person.
    pub fn true_bearing_error(&self) -> Result<Angle> {
        crate::geom::bearing_error(&self.robot.pose, self.person.position)
    }

    pub fn person_distance(&self) -> f64 {
        self.robot.pose.position().distance(self.person.position)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}
