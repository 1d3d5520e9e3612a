//! Mixed car/motorcycle microscopic traffic.
//!
//! Cars are lane-bound ellipses with a fixed heading; motorcycles are disks
//! that steer freely. Both use a collision-free first-order speed law, and
//! motorcycles additionally anticipate their neighbours and are pushed
//! sideways by them and by the curbs.
//!
//! Besides the simulator, the crate ships the trajectory tooling used to
//! study such traffic: steering-event segmentation with maneuver detection,
//! and the speed/spacing and lateral-position estimators.

// `!(x > 0.0)` is deliberate: NaN has to fail validation too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod navigation;
pub mod params;
pub mod sampler;
pub mod segmentation;
pub mod speed;
pub mod trajectory;

pub use engine::{run, run_from, step, RunOutput, SimulationConfig, SimulationError};
pub use geometry::{AgentState, BodyShape, ModeClass, RoadGeometry};
pub use params::ModelParams;
pub use trajectory::{TrajectoryRecord, TrajectoryRow};
