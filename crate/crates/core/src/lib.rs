//! Microscopic pedestrian simulation.
//!
//! Three models share one scene description and one stepping engine:
//!
//! * [`cellular`]: benefit-cost cellular automaton on a square grid,
//! * [`magnetic`]: Coulomb-style pole forces with collision-avoidance turns,
//! * [`social`]: relaxation toward an intended velocity plus exponential
//!   repulsion.
//!
//! [`engine::run`] turns a [`Scenario`] into a trajectory, [`metrics`]
//! measures flow, density and queues on it, and [`calibrate`] fits model
//! constants to a reference trajectory by grid search. [`io`] holds the
//! scenario and trajectory file formats.
//!
//! Per-agent force evaluation and calibration sweeps run on rayon when the
//! `parallel` feature is enabled (the default); see [`par::Execution`].

pub mod calibrate;
pub mod cellular;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod io;
pub mod magnetic;
pub mod metrics;
pub mod par;
pub mod rng;
pub mod scene;
pub mod social;

pub use engine::{run, RunOutput, RunSummary, Runner, TrajectoryRecord};
pub use error::{Error, Result, ValidationError};
pub use geometry::{Obstacle, Rect, Vec2};
pub use par::Execution;
pub use scene::{Agent, AgentId, ModelKind, ModelParams, Scenario};
