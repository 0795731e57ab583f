//! Agents, scenarios and their validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::cellular::CellularParams;
use crate::error::{Error, ValidationError};
use crate::geometry::{Obstacle, Rect, Vec2};
use crate::magnetic::MagneticParams;
use crate::metrics::MeasureRegion;
use crate::social::SocialParams;

pub type AgentId = u32;

/// Speed used to derive a target time when none is given (m/s).
pub const PREFERRED_WALKING_SPEED: f64 = 1.34;

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub position: Vec2,
    pub velocity: Vec2,
    pub destination: Vec2,
    /// Absolute simulation time by which the agent intends to arrive.
    pub target_time: f64,
    pub radius: f64,
    pub mass: f64,
    /// Positive magnetic pole strength.
    pub charge: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub arrived: bool,
}

impl Agent {
    pub const DEFAULT_RADIUS: f64 = 0.25;
    pub const DEFAULT_MASS: f64 = 1.0;
    pub const DEFAULT_CHARGE: f64 = 1.0;
    pub const DEFAULT_V_MAX: f64 = 2.0;
    pub const DEFAULT_V_MIN: f64 = 0.0;

    /// Agent at rest with default body attributes; the target time assumes
    /// the preferred walking speed.
    pub fn new(id: AgentId, position: Vec2, destination: Vec2) -> Self {
        Agent {
            id,
            position,
            velocity: Vec2::ZERO,
            destination,
            target_time: (position.distance(destination) / PREFERRED_WALKING_SPEED).max(1e-3),
            radius: Self::DEFAULT_RADIUS,
            mass: Self::DEFAULT_MASS,
            charge: Self::DEFAULT_CHARGE,
            v_max: Self::DEFAULT_V_MAX,
            v_min: Self::DEFAULT_V_MIN,
            arrived: false,
        }
    }

    pub fn with_velocity(mut self, velocity: Vec2) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn with_target_time(mut self, target_time: f64) -> Self {
        self.target_time = target_time;
        self
    }

    pub fn with_speed_limits(mut self, v_min: f64, v_max: f64) -> Self {
        self.v_min = v_min;
        self.v_max = v_max;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge = charge;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Cellular,
    Magnetic,
    Social,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cellular, ModelKind::Magnetic, ModelKind::Social];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cellular => "cellular",
            ModelKind::Magnetic => "magnetic",
            ModelKind::Social => "social",
        }
    }

    pub fn is_discrete(self) -> bool {
        self == ModelKind::Cellular
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cellular" => Ok(ModelKind::Cellular),
            "magnetic" => Ok(ModelKind::Magnetic),
            "social" => Ok(ModelKind::Social),
            other => Err(Error::invalid(
                "model",
                format!("expected one of cellular, magnetic, social; got `{other}`"),
            )),
        }
    }
}

/// Constant sets for all three models. Every scenario carries all of them so
/// one scene can be replayed under any model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    pub cellular: CellularParams,
    pub magnetic: MagneticParams,
    pub social: SocialParams,
}

impl ModelParams {
    /// Sets a parameter by name. Accepts `model.name` or a bare name, which
    /// resolves against `model`.
    pub fn set(&mut self, model: ModelKind, name: &str, value: f64) -> Result<(), Error> {
        let (target, key) = match name.split_once('.') {
            Some((m, k)) => (m.parse::<ModelKind>()?, k),
            None => (model, name),
        };
        let ok = match target {
            ModelKind::Cellular => self.cellular.set(key, value),
            ModelKind::Magnetic => self.magnetic.set(key, value),
            ModelKind::Social => self.social.set(key, value),
        };
        if ok {
            Ok(())
        } else {
            Err(ValidationError::UnknownParameter {
                field: target.name().to_string(),
                name: key.to_string(),
            }
            .into())
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.cellular.validate()?;
        self.magnetic.validate()?;
        self.social.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelKind,
    pub params: ModelParams,
    pub bounds: Rect,
    pub dt: f64,
    pub max_time: f64,
    pub seed: u64,
    pub arrival_tolerance: f64,
    pub agents: Vec<Agent>,
    pub obstacles: Vec<Obstacle>,
    /// Boundary polylines. They act exactly like obstacles but are kept
    /// apart so scenario files can distinguish room outlines from furniture.
    pub walls: Vec<Obstacle>,
    /// Named measurement regions used by reports (`upstream`, `exit`, ...).
    pub regions: BTreeMap<String, MeasureRegion>,
}

impl Scenario {
    pub const DEFAULT_DT: f64 = 0.05;
    pub const DEFAULT_ARRIVAL_TOLERANCE: f64 = 0.3;

    pub fn new(model: ModelKind, bounds: Rect) -> Self {
        Scenario {
            model,
            params: ModelParams::default(),
            bounds,
            dt: Self::DEFAULT_DT,
            max_time: 60.0,
            seed: 0,
            arrival_tolerance: Self::DEFAULT_ARRIVAL_TOLERANCE,
            agents: Vec::new(),
            obstacles: Vec::new(),
            walls: Vec::new(),
            regions: BTreeMap::new(),
        }
    }

    /// Obstacles followed by walls.
    pub fn all_obstacles(&self) -> impl Iterator<Item = &Obstacle> {
        self.obstacles.iter().chain(self.walls.iter())
    }

    pub fn region(&self, name: &str) -> Option<&MeasureRegion> {
        self.regions.get(name)
    }

    /// Checks every scenario invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), ValidationError> {
        finite("bounds.min", self.bounds.min)?;
        finite("bounds.max", self.bounds.max)?;
        if !(self.bounds.max.x > self.bounds.min.x && self.bounds.max.y > self.bounds.min.y) {
            return Err(ValidationError::EmptyBounds);
        }
        positive("dt", self.dt)?;
        positive("max_time", self.max_time)?;
        positive("arrival_tolerance", self.arrival_tolerance)?;
        if self.dt >= self.max_time {
            return Err(ValidationError::TimeStep {
                dt: self.dt,
                max_time: self.max_time,
            });
        }
        self.params.validate()?;

        for (i, o) in self.obstacles.iter().enumerate() {
            validate_obstacle(&format!("obstacles[{i}]"), o)?;
        }
        for (i, o) in self.walls.iter().enumerate() {
            validate_obstacle(&format!("walls[{i}]"), o)?;
        }

        let mut seen = HashSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            let at = |f: &str| format!("agents[{i}].{f}");
            finite(&at("position"), a.position)?;
            finite(&at("velocity"), a.velocity)?;
            finite(&at("destination"), a.destination)?;
            positive(&at("target_time"), a.target_time)?;
            positive(&at("radius"), a.radius)?;
            positive(&at("mass"), a.mass)?;
            positive(&at("charge"), a.charge)?;
            positive(&at("v_max"), a.v_max)?;
            non_negative(&at("v_min"), a.v_min)?;
            if a.v_min > a.v_max {
                return Err(ValidationError::SpeedRange {
                    field: format!("agents[{i}]"),
                    id: a.id,
                    v_min: a.v_min,
                    v_max: a.v_max,
                });
            }
            if !seen.insert(a.id) {
                return Err(ValidationError::DuplicateAgentId {
                    field: at("id"),
                    id: a.id,
                });
            }
            if !self.bounds.contains_closed(a.position) {
                return Err(ValidationError::AgentOutOfBounds {
                    field: at("position"),
                    id: a.id,
                    x: a.position.x,
                    y: a.position.y,
                });
            }
            if self.all_obstacles().any(|o| o.contains(a.position)) {
                return Err(ValidationError::AgentInObstacle {
                    field: at("position"),
                    id: a.id,
                });
            }
        }
        Ok(())
    }
}

fn validate_obstacle(field: &str, o: &Obstacle) -> Result<(), ValidationError> {
    if o.vertices.len() < 2 {
        return Err(ValidationError::TooFewVertices {
            field: field.to_string(),
            count: o.vertices.len(),
        });
    }
    for (i, v) in o.vertices.iter().enumerate() {
        finite(&format!("{field}.vertices[{i}]"), *v)?;
    }
    if let Some(index) = o.vertices.windows(2).position(|w| w[0] == w[1]) {
        return Err(ValidationError::RepeatedVertex {
            field: field.to_string(),
            index,
        });
    }
    positive(&format!("{field}.charge"), o.charge)
}

fn finite(field: &str, v: Vec2) -> Result<(), ValidationError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::NonFinite {
            field: field.to_string(),
        })
    }
}

pub(crate) fn positive(field: &str, value: f64) -> Result<(), ValidationError> {
    if !value.is_finite() {
        return Err(ValidationError::NonFinite {
            field: field.to_string(),
        });
    }
    if value > 0.0 {
        Ok(())
    } else {
        Err(ValidationError::NonPositive {
            field: field.to_string(),
            value,
        })
    }
}

pub(crate) fn non_negative(field: &str, value: f64) -> Result<(), ValidationError> {
    if !value.is_finite() {
        return Err(ValidationError::NonFinite {
            field: field.to_string(),
        });
    }
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ValidationError::Negative {
            field: field.to_string(),
            value,
        })
    }
}
