use thiserror::Error;

use crate::scene::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("agent {0} is at its destination and must be excluded")]
    ArrivedAgent(AgentId),

    #[error("scenario validation failed: {0}")]
    Validation(#[from] ValidationError),

    #[error("non-finite {term} acceleration for agent {agent} at t = {time}")]
    NonFinite {
        agent: AgentId,
        term: &'static str,
        time: f64,
    },

    #[error("simulation already finished at t = {0}")]
    Finished(f64),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("time {time} is outside the trajectory span [{start}, {end}]")]
    OutOfSpan { time: f64, start: f64, end: f64 },

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("{0}")]
    Parse(#[from] crate::io::ParseError),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

/// One violated scenario invariant. `field` is a dotted path such as
/// `agents[3].radius`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{field}: value is not finite")]
    NonFinite { field: String },

    #[error("{field}: must be > 0 (got {value})")]
    NonPositive { field: String, value: f64 },

    #[error("{field}: must be >= 0 (got {value})")]
    Negative { field: String, value: f64 },

    #[error("{field}: duplicate agent id {id}")]
    DuplicateAgentId { field: String, id: AgentId },

    #[error("{field}: agent {id} at ({x}, {y}) lies outside the scene bounds")]
    AgentOutOfBounds {
        field: String,
        id: AgentId,
        x: f64,
        y: f64,
    },

    #[error("{field}: agent {id} has v_min {v_min} > v_max {v_max}")]
    SpeedRange {
        field: String,
        id: AgentId,
        v_min: f64,
        v_max: f64,
    },

    #[error("{field}: agent {id} overlaps an obstacle")]
    AgentInObstacle { field: String, id: AgentId },

    #[error("{field}: polyline needs at least 2 vertices (got {count})")]
    TooFewVertices { field: String, count: usize },

    #[error("{field}: vertices {index} and {} coincide", index + 1)]
    RepeatedVertex { field: String, index: usize },

    #[error("bounds: max must exceed min on both axes")]
    EmptyBounds,

    #[error("dt: time step {dt} must be smaller than max_time {max_time}")]
    TimeStep { dt: f64, max_time: f64 },

    #[error("cellular.field_radius: {field_radius} must be >= cell_size {cell_size}")]
    FieldRadius { field_radius: f64, cell_size: f64 },

    #[error("magnetic.beta_max: {0} must lie in (0, pi/2)")]
    BetaMax(f64),

    #[error("magnetic.goal_charge: {0} must be negative")]
    GoalCharge(f64),

    #[error("agents[{index}]: agent {id} starts in a blocked cell")]
    BlockedCell { index: usize, id: AgentId },

    #[error("agents[{index}]: agent {id} starts in the cell already held by agent {holder}")]
    SharedCell {
        index: usize,
        id: AgentId,
        holder: AgentId,
    },

    #[error("{field}: unknown parameter name `{name}`")]
    UnknownParameter { field: String, name: String },
}
