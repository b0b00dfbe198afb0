//! Quality-diversity generation of end-effector trajectory primitives for
//! articulated-object activation tasks.
//!
//! Given an articulated object (a URDF subset or the builtin experimental
//! box) and a single-joint activation task, the engine illuminates a 1 cm
//! spatial archive of grasp starting frames, each carrying the trajectory a
//! deterministic kinematic surrogate produced from it and the fraction of
//! the commanded joint travel it achieved.

pub mod error;
pub mod grasp;
pub mod harness;
pub mod interaction;
pub mod object;
pub mod qd;
pub mod rng;
pub mod se3;

pub use error::{Error, Result};
pub use se3::{bin_descriptor, CellKey, Pose, Quat, Vec3};
