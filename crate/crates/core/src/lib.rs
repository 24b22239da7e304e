//! Person following for an omnidirectional base: a Dynamic Window Approach
//! planner drives the linear velocities while a Soft Actor-Critic agent
//! steers the yaw to keep the person in the camera's field of view.

pub mod controller;
pub mod dwa;
pub mod env;
pub mod error;
pub mod eval;
pub mod geom;
pub mod metrics;
pub mod nn;
pub mod perception;
pub mod runlog;
pub mod sac;
pub mod scenario;
pub mod svg;
pub mod train;
pub mod world;

pub use error::{Error, Result};
