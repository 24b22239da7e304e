//! Dynamic Window Approach over the omnidirectional `(vx, vy)` window, plus a
//! classic `(vx, ω)` window for differential platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bearing_error, integrate_pose, Point2D, Pose2D, Velocity2D};
use crate::world::{LidarScan, Limits};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaWeights {
    pub goal: f64,
    pub obstacle: f64,
    pub speed: f64,
    /// Only used by the differential window.
    pub heading: f64,
}

impl Default for DwaWeights {
    fn default() -> Self {
        Self {
            goal: 1.0,
            obstacle: 0.3,
            speed: 0.1,
            heading: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    pub limits: Limits,
    pub samples_per_axis: usize,
    pub horizon: f64,
    pub rollout_dt: f64,
    pub weights: DwaWeights,
    pub standoff: f64,
    /// Minimum admissible distance from the robot center to a scan point.
    /// A point that is already closer only has to not get closer.
    pub inflation: f64,
    /// Scan points farther than this from every rollout pose are ignored,
    /// and clearance saturates here.
    pub clearance_cap: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            samples_per_axis: 11,
            horizon: 1.5,
            rollout_dt: 0.1,
            weights: DwaWeights::default(),
            standoff: 1.0,
            inflation: 0.3,
            clearance_cap: 2.0,
        }
    }
}

impl DwaConfig {
    pub fn validate(&self, footprint_radius: f64) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0) || !(self.rollout_dt > 0.0) {
            return bad("dwa.horizon and dwa.rollout_dt must be > 0".into());
        }
        if self.samples_per_axis < 3 {
            return bad(format!("dwa.samples_per_axis must be >= 3, got {}", self.samples_per_axis));
        }
        let w = &self.weights;
        if [w.goal, w.obstacle, w.speed, w.heading].iter().any(|v| !(*v >= 0.0)) {
            return bad("dwa.weights must be >= 0".into());
        }
        if !(self.standoff > footprint_radius) {
            return bad(format!(
                "dwa.standoff ({}) must exceed the footprint radius ({footprint_radius})",
                self.standoff
            ));
        }
        if !(self.inflation >= footprint_radius) {
            return bad(format!(
                "dwa.inflation ({}) must be at least the footprint radius ({footprint_radius})",
                self.inflation
            ));
        }
        if !(self.clearance_cap > self.inflation) {
            return bad("dwa.clearance_cap must exceed dwa.inflation".into());
        }
        Ok(())
    }

    fn rollout_steps(&self) -> usize {
        ((self.horizon / self.rollout_dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRange {
    pub lo: f64,
    pub hi: f64,
}

impl WindowRange {
    fn around(v: f64, accel: f64, limit: f64, dt: f64) -> Self {
        let lo = (v - accel * dt).max(-limit);
        let hi = (v + accel * dt).min(limit);
        // A current velocity outside the limits still yields a valid range.
        if lo > hi {
            let c = v.clamp(-limit, limit);
            Self { lo: c, hi: c }
        } else {
            Self { lo, hi }
        }
    }

    /// `n` evenly spaced values from `lo` to `hi` inclusive.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

/// Reachable `(vx, vy)` ranges after `dt` under the acceleration limits.
pub fn dynamic_window(current: &Velocity2D, cfg: &DwaConfig, dt: f64) -> Result<(WindowRange, WindowRange)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let l = &cfg.limits;
    Ok((
        WindowRange::around(current.vx, l.linear_accel, l.v_max, dt),
        WindowRange::around(current.vy, l.linear_accel, l.v_max, dt),
    ))
}

/// Reachable `(vx, ω)` ranges for the differential window.
pub fn differential_window(
    current: &Velocity2D,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<(WindowRange, WindowRange)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let l = &cfg.limits;
    Ok((
        WindowRange::around(current.vx, l.linear_accel, l.v_max, dt),
        WindowRange::around(current.omega, l.angular_accel, l.omega_max, dt),
    ))
}

/// Goal on the robot→person segment, `standoff` short of the person.
pub fn truncate_goal(robot: Point2D, person: Point2D, standoff: f64) -> Point2D {
    let d = robot.distance(person);
    if d <= standoff {
        return robot;
    }
    if standoff == 0.0 {
        return person;
    }
    robot + (person - robot).scale((d - standoff) / d)
}

/// What the planner sees: its pose, the latest scan and its current twist.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub pose: Pose2D,
    pub scan: &'a LidarScan,
    pub velocity: Velocity2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrajectory {
    pub velocity: Velocity2D,
    /// Poses after each rollout step; the start pose is not included.
    pub poses: Vec<Pose2D>,
    pub goal_dist: f64,
    pub min_clearance: f64,
    pub speed: f64,
    pub heading: f64,
    pub cost: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaPlan {
    pub command: Velocity2D,
    pub blocked: bool,
    pub admissible: usize,
    /// Clearance along the chosen rollout (or at the robot when blocked).
    pub min_clearance: f64,
    pub cost: f64,
}

/// Constant-twist rollout with the simulator's kinematics.
pub fn rollout(start: &Pose2D, cmd: &Velocity2D, cfg: &DwaConfig) -> Vec<Pose2D> {
    let mut pose = *start;
    (0..cfg.rollout_steps())
        .map(|_| {
            pose = integrate_pose(&pose, cmd, cfg.rollout_dt);
            pose
        })
        .collect()
}

struct Obstacles {
    points: Vec<Point2D>,
    /// Squared admissibility bound per point: the inflation radius, or the
    /// point's current distance when the robot is already closer than that.
    bounds: Vec<f64>,
    cap: f64,
}

impl Obstacles {
    fn new(view: &WorldView, cfg: &DwaConfig) -> Self {
        let reach = cfg.clearance_cap + cfg.horizon * cfg.limits.v_max * std::f64::consts::SQRT_2;
        let here = view.pose.position();
        let points: Vec<Point2D> = view
            .scan
            .hit_points(&view.pose)
            .into_iter()
            .filter(|p| p.distance(here) <= reach)
            .collect();
        let inflation2 = cfg.inflation * cfg.inflation;
        let bounds = points.iter().map(|q| dist2(*q, here).min(inflation2)).collect();
        Self {
            points,
            bounds,
            cap: cfg.clearance_cap,
        }
    }

    fn clearance(&self, p: Point2D) -> f64 {
        let mut best = self.cap * self.cap;
        for q in &self.points {
            best = best.min(dist2(*q, p));
        }
        best.sqrt()
    }

    /// No point may come inside its bound. Points already within the
    /// inflation radius may not be approached further, so a robot that
    /// starts too close can still back away.
    fn admits(&self, p: Point2D) -> bool {
        self.points.iter().zip(&self.bounds).all(|(q, b)| dist2(*q, p) >= *b)
    }
}

fn dist2(a: Point2D, b: Point2D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

fn score(
    view: &WorldView,
    obstacles: &Obstacles,
    cmd: Velocity2D,
    goal: Point2D,
    heading_target: Option<Point2D>,
    cfg: &DwaConfig,
) -> CandidateTrajectory {
    let poses = rollout(&view.pose, &cmd, cfg);
    let mut min_clearance = cfg.clearance_cap;
    let mut admissible = true;
    for p in &poses {
        min_clearance = min_clearance.min(obstacles.clearance(p.position()));
        admissible = admissible && obstacles.admits(p.position());
    }
    let end = poses.last().copied().unwrap_or(view.pose);
    let goal_dist = end.position().distance(goal);
    let speed = cfg.limits.v_max - cmd.linear_speed();
    let heading = heading_target
        .and_then(|t| bearing_error(&end, t).ok())
        .map_or(0.0, |a| a.radians().abs());
    let w = &cfg.weights;
    let mut cost = w.goal * goal_dist + w.obstacle / min_clearance + w.speed * speed;
    if heading_target.is_some() {
        cost += w.heading * heading;
    }
    CandidateTrajectory {
        velocity: cmd,
        poses,
        goal_dist,
        min_clearance,
        speed,
        heading,
        cost,
        admissible,
    }
}

/// Ordering used to pick the winner: cost, then lower speed, then the
/// first two command components lexicographically.
fn better(a: &CandidateTrajectory, b: &CandidateTrajectory, second: fn(&Velocity2D) -> f64) -> bool {
    let ka = (a.cost, a.velocity.linear_speed(), a.velocity.vx, second(&a.velocity));
    let kb = (b.cost, b.velocity.linear_speed(), b.velocity.vx, second(&b.velocity));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        .then(ka.3.total_cmp(&kb.3))
        .is_lt()
}

fn check_inputs(view: &WorldView, goal: Point2D) -> Result<()> {
    if !goal.is_finite() {
        return Err(Error::NonFinite("goal"));
    }
    if view.scan.ranges.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidArgument("scan has invalid ranges".into()));
    }
    Ok(())
}

/// Every `(vx, vy)` candidate of the window, scored, in grid order.
pub fn candidates(
    view: &WorldView,
    goal: Point2D,
    omega_fixed: f64,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<Vec<CandidateTrajectory>> {
    check_inputs(view, goal)?;
    let (wx, wy) = dynamic_window(&view.velocity, cfg, dt)?;
    let obstacles = Obstacles::new(view, cfg);
    let n = cfg.samples_per_axis;
    let mut out = Vec::with_capacity(n * n);
    for vx in wx.samples(n) {
        for vy in wy.samples(n) {
            let cmd = Velocity2D::new(vx, vy, omega_fixed);
            out.push(score(view, &obstacles, cmd, goal, None, cfg));
        }
    }
    Ok(out)
}

fn select(
    cands: &[CandidateTrajectory],
    stop: Velocity2D,
    here_clearance: f64,
    second: fn(&Velocity2D) -> f64,
) -> DwaPlan {
    let mut best: Option<&CandidateTrajectory> = None;
    let mut admissible = 0;
    for c in cands.iter().filter(|c| c.admissible) {
        admissible += 1;
        if best.is_none_or(|b| better(c, b, second)) {
            best = Some(c);
        }
    }
    match best {
        Some(b) => DwaPlan {
            command: b.velocity,
            blocked: false,
            admissible,
            min_clearance: b.min_clearance,
            cost: b.cost,
        },
        None => DwaPlan {
            command: stop,
            blocked: true,
            admissible: 0,
            min_clearance: here_clearance,
            cost: f64::INFINITY,
        },
    }
}

/// Best `(vx, vy)` toward `goal` with `ω` held at `omega_fixed`. When every
/// candidate is inadmissible the robot stops translating.
pub fn plan(
    view: &WorldView,
    goal: Point2D,
    omega_fixed: f64,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<DwaPlan> {
    let cands = candidates(view, goal, omega_fixed, cfg, dt)?;
    let here = Obstacles::new(view, cfg).clearance(view.pose.position());
    Ok(select(
        &cands,
        Velocity2D::new(0.0, 0.0, omega_fixed),
        here,
        |v| v.vy,
    ))
}

/// Forward-only variant of [`plan`]: `vy` is pinned to zero and `ω` is
/// held at `omega_fixed`.
pub fn plan_forward(
    view: &WorldView,
    goal: Point2D,
    omega_fixed: f64,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<DwaPlan> {
    check_inputs(view, goal)?;
    let (wx, _) = dynamic_window(&view.velocity, cfg, dt)?;
    let obstacles = Obstacles::new(view, cfg);
    let cands: Vec<_> = wx
        .samples(cfg.samples_per_axis)
        .into_iter()
        .map(|vx| {
            let cmd = Velocity2D::new(vx, 0.0, omega_fixed);
            score(view, &obstacles, cmd, goal, None, cfg)
        })
        .collect();
    let here = obstacles.clearance(view.pose.position());
    Ok(select(&cands, Velocity2D::new(0.0, 0.0, omega_fixed), here, |v| v.vy))
}

/// Every `(vx, ω)` candidate of the differential window, scored.
pub fn differential_candidates(
    view: &WorldView,
    goal: Point2D,
    heading_target: Point2D,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<Vec<CandidateTrajectory>> {
    check_inputs(view, goal)?;
    let (wv, ww) = differential_window(&view.velocity, cfg, dt)?;
    let obstacles = Obstacles::new(view, cfg);
    let n = cfg.samples_per_axis;
    let mut out = Vec::with_capacity(n * n);
    for vx in wv.samples(n) {
        for omega in ww.samples(n) {
            let cmd = Velocity2D::new(vx, 0.0, omega);
            out.push(score(view, &obstacles, cmd, goal, Some(heading_target), cfg));
        }
    }
    Ok(out)
}

/// Differential-drive plan: `vy` is always zero and `ω` comes from the
/// window, with an extra cost on the end-of-rollout bearing to
/// `heading_target`.
pub fn plan_differential(
    view: &WorldView,
    goal: Point2D,
    heading_target: Point2D,
    cfg: &DwaConfig,
    dt: f64,
) -> Result<DwaPlan> {
    let cands = differential_candidates(view, goal, heading_target, cfg, dt)?;
    let here = Obstacles::new(view, cfg).clearance(view.pose.position());
    // Turning in place is always safe for a round footprint.
    let (_, ww) = differential_window(&view.velocity, cfg, dt)?;
    let spin = view.velocity.omega.clamp(ww.lo, ww.hi);
    Ok(select(&cands, Velocity2D::new(0.0, 0.0, spin), here, |v| v.omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::tests::empty_world;
    use crate::world::Obstacle;
    use std::sync::Arc;

    fn pose(x: f64, y: f64, h: f64) -> Pose2D {
        Pose2D::new(x, y, h).unwrap()
    }

    #[test]
    fn window_examples() {
        let cfg = DwaConfig::default();
        let (wx, wy) = dynamic_window(&Velocity2D::ZERO, &cfg, 0.1).unwrap();
        assert!((wx.lo + 0.1).abs() < 1e-12 && (wx.hi - 0.1).abs() < 1e-12);
        assert_eq!(wx, wy);
        let (wx, _) = dynamic_window(&Velocity2D::new(0.5, 0.0, 0.0), &cfg, 0.1).unwrap();
        assert_eq!(wx.hi, 0.5);
        assert!((wx.lo - 0.4).abs() < 1e-12);
        let mut frozen = cfg;
        frozen.limits.linear_accel = 0.0;
        let (wx, wy) = dynamic_window(&Velocity2D::new(0.2, -0.1, 0.0), &frozen, 0.1).unwrap();
        assert_eq!((wx.lo, wx.hi, wy.lo, wy.hi), (0.2, 0.2, -0.1, -0.1));
        assert!(dynamic_window(&Velocity2D::ZERO, &cfg, 0.0).is_err());
    }

    #[test]
    fn samples_are_inclusive() {
        let r = WindowRange { lo: -0.1, hi: 0.1 };
        let s = r.samples(11);
        assert_eq!(s.len(), 11);
        assert_eq!(s[0], -0.1);
        assert_eq!(s[10], 0.1);
        assert!(s[5].abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        let o = Point2D::new(0.0, 0.0);
        assert_eq!(truncate_goal(o, Point2D::new(4.0, 0.0), 1.0), Point2D::new(3.0, 0.0));
        assert_eq!(truncate_goal(o, Point2D::new(0.5, 0.5), 1.0), o);
        let p = Point2D::new(2.5, -1.0);
        assert_eq!(truncate_goal(o, p, 0.0), p);
    }

    #[test]
    fn rollout_matches_integration() {
        let cfg = DwaConfig::default();
        let start = pose(1.0, -2.0, 0.4);
        let cmd = Velocity2D::new(0.3, -0.2, 0.7);
        let poses = rollout(&start, &cmd, &cfg);
        assert_eq!(poses.len(), 15);
        let mut p = start;
        for q in &poses {
            p = integrate_pose(&p, &cmd, 0.1);
            assert_eq!(*q, p);
        }
    }

    #[test]
    fn empty_world_goal_ahead_and_left() {
        let w = empty_world(Pose2D::default());
        let scan = w.scan();
        let view = WorldView { pose: w.robot.pose, scan: &scan, velocity: Velocity2D::ZERO };
        let cfg = DwaConfig::default();
        let ahead = plan(&view, Point2D::new(2.0, 0.0), 0.0, &cfg, 0.1).unwrap();
        assert!(ahead.command.vx > 0.0);
        assert!(ahead.command.vy.abs() <= 0.01 + 1e-12);
        let left = plan(&view, Point2D::new(0.0, 3.0), 0.0, &cfg, 0.1).unwrap();
        assert!(left.command.vy > 0.0);
        assert_eq!(ahead.admissible, 121);
    }

    #[test]
    fn wall_ahead_blocks_forward() {
        let mut w = empty_world(Pose2D::default());
        w.obstacles = Arc::new(vec![Obstacle::Segment {
            a: Point2D::new(0.32, -3.0),
            b: Point2D::new(0.32, 3.0),
            thickness: 0.0,
        }]);
        let scan = w.scan();
        let view = WorldView { pose: w.robot.pose, scan: &scan, velocity: Velocity2D::ZERO };
        let cfg = DwaConfig::default();
        let cands = candidates(&view, Point2D::new(3.0, 0.0), 0.0, &cfg, 0.1).unwrap();
        assert!(cands.iter().filter(|c| c.velocity.vx > 0.0).all(|c| !c.admissible));
        let p = plan(&view, Point2D::new(3.0, 0.0), 0.0, &cfg, 0.1).unwrap();
        assert!(p.command.vx <= 0.0 || p.command.vy != 0.0);
    }

    #[test]
    fn fully_blocked_stops() {
        let mut w = empty_world(Pose2D::default());
        w.obstacles = Arc::new(
            (0..36)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 36.0;
                    Obstacle::Circle { center: Point2D::new(0.3 * a.cos(), 0.3 * a.sin()), radius: 0.07 }
                })
                .collect(),
        );
        let scan = w.scan();
        // Already moving: every reachable twist translates toward the ring.
        let view = WorldView { pose: w.robot.pose, scan: &scan, velocity: Velocity2D::new(0.3, 0.0, 0.0) };
        let cfg = DwaConfig::default();
        let p = plan(&view, Point2D::new(3.0, 0.0), 0.3, &cfg, 0.1).unwrap();
        assert!(p.blocked);
        assert_eq!(p.admissible, 0);
        assert_eq!(p.command, Velocity2D::new(0.0, 0.0, 0.3));
    }

    #[test]
    fn differential_never_moves_sideways() {
        let w = empty_world(pose(0.0, 0.0, 1.0));
        let scan = w.scan();
        let view = WorldView { pose: w.robot.pose, scan: &scan, velocity: Velocity2D::ZERO };
        let cfg = DwaConfig::default();
        let goal = Point2D::new(0.0, -3.0);
        let cands = differential_candidates(&view, goal, goal, &cfg, 0.1).unwrap();
        assert!(cands.iter().all(|c| c.velocity.vy == 0.0));
        let p = plan_differential(&view, goal, goal, &cfg, 0.1).unwrap();
        assert_eq!(p.command.vy, 0.0);
        // Target is to the right: it should start turning right.
        assert!(p.command.omega < 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(DwaConfig::default().validate(0.2).is_ok());
        assert!(DwaConfig { samples_per_axis: 2, ..DwaConfig::default() }.validate(0.2).is_err());
        assert!(DwaConfig { standoff: 0.1, ..DwaConfig::default() }.validate(0.2).is_err());
    }
}
