use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rldwa::dwa::{candidates, plan, rollout, DwaConfig, WorldView};
use rldwa::geom::{Point2D, Pose2D, Velocity2D};
use rldwa::world::{LidarConfig, LidarScan, Limits, Obstacle, PersonState, RobotState, WorldState};

fn world(pose: Pose2D, velocity: Velocity2D, obstacles: Vec<Obstacle>) -> WorldState {
    WorldState {
        robot: RobotState {
            pose,
            velocity,
            footprint_radius: 0.2,
            limits: Limits::default(),
        },
        person: PersonState::new(Point2D::new(50.0, 50.0), vec![], 0.0),
        obstacles: Arc::new(obstacles),
        lidar: LidarConfig::default(),
        time: 0.0,
        rng_seed: 0,
        collided: false,
        collision_count: 0,
    }
}

/// Straightforward re-implementation of the planner: every grid command,
/// Euler rollouts, clearance against the scan's hit points.
struct Reference {
    commands: Vec<(f64, f64)>,
    costs: Vec<f64>,
    admissible: Vec<bool>,
}

fn reference(pose: Pose2D, vel: Velocity2D, scan: &LidarScan, goal: Point2D, omega: f64, cfg: &DwaConfig) -> Reference {
    let h0 = pose.heading.radians();
    let pts: Vec<(f64, f64)> = scan
        .ranges
        .iter()
        .zip(&scan.angles)
        .filter(|(r, _)| **r < scan.max_range)
        .map(|(r, a)| (pose.x + r * (h0 + a).cos(), pose.y + r * (h0 + a).sin()))
        .collect();
    let near = |x: f64, y: f64| {
        pts.iter()
            .map(|(px, py)| ((px - x).powi(2) + (py - y).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let now: Vec<f64> = pts.iter().map(|(px, py)| ((px - pose.x).powi(2) + (py - pose.y).powi(2)).sqrt()).collect();
    let l = &cfg.limits;
    let axis = |v: f64| {
        let lo = (v - l.linear_accel * 0.1).max(-l.v_max);
        let hi = (v + l.linear_accel * 0.1).min(l.v_max);
        let n = cfg.samples_per_axis;
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    };
    let steps = (cfg.horizon / cfg.rollout_dt).round() as usize;
    let mut out = Reference { commands: vec![], costs: vec![], admissible: vec![] };
    for vx in axis(vel.vx) {
        for vy in axis(vel.vy) {
            let (mut x, mut y, mut h) = (pose.x, pose.y, h0);
            let mut clear = cfg.clearance_cap;
            let mut ok = true;
            for _ in 0..steps {
                x += (vx * h.cos() - vy * h.sin()) * cfg.rollout_dt;
                y += (vx * h.sin() + vy * h.cos()) * cfg.rollout_dt;
                h += omega * cfg.rollout_dt;
                clear = clear.min(near(x, y));
                for (k, (px, py)) in pts.iter().enumerate() {
                    let d = ((px - x).powi(2) + (py - y).powi(2)).sqrt();
                    if d < cfg.inflation.min(now[k]) - 1e-12 {
                        ok = false;
                    }
                }
            }
            let w = &cfg.weights;
            let end = ((x - goal.x).powi(2) + (y - goal.y).powi(2)).sqrt();
            let cost = w.goal * end + w.obstacle / clear + w.speed * (l.v_max - (vx * vx + vy * vy).sqrt());
            out.commands.push((vx, vy));
            out.costs.push(cost);
            out.admissible.push(ok);
        }
    }
    out
}

fn random_obstacles(rng: &mut ChaCha8Rng, n: usize) -> Vec<Obstacle> {
    let mut obs = Vec::new();
    while obs.len() < n {
        let c = Point2D::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
        let o = if rng.random::<bool>() {
            Obstacle::Circle { center: c, radius: rng.random_range(0.1..0.6) }
        } else {
            let a = rng.random_range(0.0..std::f64::consts::PI);
            let half = rng.random_range(0.3..1.5);
            Obstacle::Segment {
                a: Point2D::new(c.x - half * a.cos(), c.y - half * a.sin()),
                b: Point2D::new(c.x + half * a.cos(), c.y + half * a.sin()),
                thickness: rng.random_range(0.05..0.3),
            }
        };
        // Keep the robot's footprint clear.
        if o.distance(Point2D::new(0.0, 0.0)) > 0.22 {
            obs.push(o);
        }
    }
    obs
}

fn random_view_parts(rng: &mut ChaCha8Rng) -> (Pose2D, Velocity2D, Point2D, f64) {
    let pose = Pose2D::new(0.0, 0.0, rng.random_range(-3.1..3.1)).unwrap();
    let vel = Velocity2D::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
    let goal = Point2D::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
    (pose, vel, goal, rng.random_range(-1.0..1.0))
}

#[test]
fn plan_matches_brute_force_reference() {
    let cfg = DwaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut blocked_seen = 0;
    for scene in 0..200 {
        let (pose, vel, goal, omega) = random_view_parts(&mut rng);
        let n = rng.random_range(0..7);
        let w = world(pose, vel, random_obstacles(&mut rng, n));
        let scan = w.scan();
        let view = WorldView { pose, scan: &scan, velocity: vel };
        let got = plan(&view, goal, omega, &cfg, 0.1).unwrap();
        let r = reference(pose, vel, &scan, goal, omega, &cfg);
        let admissible = r.admissible.iter().filter(|a| **a).count();
        assert_eq!(got.admissible, admissible, "scene {scene}");
        if admissible == 0 {
            assert!(got.blocked);
            assert_eq!((got.command.vx, got.command.vy), (0.0, 0.0));
            blocked_seen += 1;
            continue;
        }
        let best = r
            .costs
            .iter()
            .zip(&r.admissible)
            .filter(|(_, a)| **a)
            .map(|(c, _)| *c)
            .fold(f64::INFINITY, f64::min);
        assert!((got.cost - best).abs() < 1e-9, "scene {scene}: {} vs {best}", got.cost);
        let matched = r.commands.iter().zip(&r.costs).zip(&r.admissible).any(|(((vx, vy), c), a)| {
            *a && (vx - got.command.vx).abs() < 1e-12 && (vy - got.command.vy).abs() < 1e-12 && (c - best).abs() < 1e-9
        });
        assert!(matched, "scene {scene}: {:?} is not a minimizer", got.command);
        assert_eq!(got.command.omega, omega);
    }
    assert!(blocked_seen < 200);
}

#[test]
fn exact_ties_prefer_lower_vy() {
    // Far goal straight ahead: (0.1, 0.1) and (0.1, -0.1) mirror each other.
    let cfg = DwaConfig::default();
    let pose = Pose2D::new(0.0, 0.0, 0.0).unwrap();
    let w = world(pose, Velocity2D::ZERO, vec![]);
    let scan = w.scan();
    let view = WorldView { pose, scan: &scan, velocity: Velocity2D::ZERO };
    let goal = Point2D::new(20.0, 0.0);
    let cands = candidates(&view, goal, 0.0, &cfg, 0.1).unwrap();
    let cost = |vx: f64, vy: f64| {
        cands
            .iter()
            .find(|c| (c.velocity.vx - vx).abs() < 1e-12 && (c.velocity.vy - vy).abs() < 1e-12)
            .unwrap()
            .cost
    };
    assert_eq!(cost(0.1, 0.1), cost(0.1, -0.1));
    let p = plan(&view, goal, 0.0, &cfg, 0.1).unwrap();
    assert_eq!(p.cost, cost(0.1, -0.1));
    assert!((p.command.vx - 0.1).abs() < 1e-12);
    assert!((p.command.vy + 0.1).abs() < 1e-12);
}

#[test]
fn removing_an_obstacle_never_shrinks_the_admissible_set() {
    let cfg = DwaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut shrank_somewhere = false;
    for _ in 0..150 {
        let (pose, vel, goal, omega) = random_view_parts(&mut rng);
        let n = rng.random_range(1..6);
        let obs = random_obstacles(&mut rng, n);
        let full = world(pose, vel, obs.clone());
        let scan = full.scan();
        let with = candidates(&WorldView { pose, scan: &scan, velocity: vel }, goal, omega, &cfg, 0.1).unwrap();
        let drop = rng.random_range(0..obs.len());
        let mut fewer = obs.clone();
        fewer.remove(drop);
        let scan2 = world(pose, vel, fewer).scan();
        let without = candidates(&WorldView { pose, scan: &scan2, velocity: vel }, goal, omega, &cfg, 0.1).unwrap();
        for (a, b) in with.iter().zip(&without) {
            assert_eq!(a.velocity, b.velocity);
            assert!(!a.admissible || b.admissible, "{:?} lost admissibility", a.velocity);
            shrank_somewhere |= a.admissible != b.admissible;
        }
    }
    assert!(shrank_somewhere, "the scenes never constrained anything");
}

#[test]
fn rollout_agrees_with_the_simulator() {
    let cfg = DwaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let pose = Pose2D::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-3.1..3.1)).unwrap();
        let cmd = Velocity2D::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
        let poses = rollout(&pose, &cmd, &cfg);
        let mut w = world(pose, Velocity2D::ZERO, vec![]);
        for p in &poses {
            w.step_robot(cmd, cfg.rollout_dt).unwrap();
            let q = w.robot.pose;
            assert!((p.x - q.x).abs() < 1e-12 && (p.y - q.y).abs() < 1e-12);
            assert!((p.heading.radians() - q.heading.radians()).abs() < 1e-12);
        }
    }
}

#[test]
fn robot_inside_inflation_may_back_away_but_not_closer() {
    let cfg = DwaConfig::default();
    let pose = Pose2D::new(0.0, 0.0, 0.0).unwrap();
    let wall = Obstacle::Segment { a: Point2D::new(0.25, -3.0), b: Point2D::new(0.25, 3.0), thickness: 0.0 };
    let w = world(pose, Velocity2D::ZERO, vec![wall]);
    let scan = w.scan();
    let view = WorldView { pose, scan: &scan, velocity: Velocity2D::ZERO };
    let cands = candidates(&view, Point2D::new(3.0, 0.0), 0.0, &cfg, 0.1).unwrap();
    for c in &cands {
        if c.velocity.vx > 1e-9 {
            assert!(!c.admissible, "{:?} approaches the wall", c.velocity);
        }
    }
    assert!(cands.iter().any(|c| c.admissible && c.velocity.vx < 0.0));
    let p = plan(&view, Point2D::new(3.0, 0.0), 0.0, &cfg, 0.1).unwrap();
    assert!(!p.blocked && p.command.vx <= 0.0);
}
