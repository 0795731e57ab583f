//! Magnetic force model.
//!
//! Pedestrians and obstacles carry positive poles and each destination a
//! negative one, so Coulomb's law pulls pedestrians to their goals and pushes
//! them apart. On top of that, a pedestrian closing in on someone (or
//! something) turns aside with the acceleration `|V| cos α tan β`.
//!
//! The avoidance geometry used here: α is the angle between the walker's
//! velocity and the line of sight to the other, β the angle between the
//! relative velocity and that line of sight. The acceleration is
//! perpendicular to the velocity, turning away from the other.

use std::f64::consts::FRAC_PI_2;

use crate::error::ValidationError;
use crate::geometry::{cross, Obstacle, Vec2};
use crate::scene::{positive, Agent};

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticParams {
    pub k_coulomb: f64,
    /// Pole strength of every destination; negative so it attracts.
    pub goal_charge: f64,
    /// Cap on β so `tan β` stays finite (rad).
    pub beta_max: f64,
    /// Distances below this are treated as `r_min` in `1/r²` (m).
    pub r_min: f64,
    /// Only pedestrians and obstacle points within this range trigger the
    /// avoidance turn (m).
    pub avoidance_radius: f64,
}

impl Default for MagneticParams {
    fn default() -> Self {
        MagneticParams {
            k_coulomb: 1.0,
            goal_charge: -20.0,
            beta_max: 80f64.to_radians(),
            r_min: 0.2,
            avoidance_radius: 2.0,
        }
    }
}

impl MagneticParams {
    pub const NAMES: [&'static str; 5] = [
        "k_coulomb",
        "goal_charge",
        "beta_max",
        "r_min",
        "avoidance_radius",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "k_coulomb" => self.k_coulomb,
            "goal_charge" => self.goal_charge,
            "beta_max" => self.beta_max,
            "r_min" => self.r_min,
            "avoidance_radius" => self.avoidance_radius,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "k_coulomb" => &mut self.k_coulomb,
            "goal_charge" => &mut self.goal_charge,
            "beta_max" => &mut self.beta_max,
            "r_min" => &mut self.r_min,
            "avoidance_radius" => &mut self.avoidance_radius,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        positive("magnetic.k_coulomb", self.k_coulomb)?;
        if self.goal_charge >= 0.0 || !self.goal_charge.is_finite() {
            return Err(ValidationError::GoalCharge(self.goal_charge));
        }
        if !(self.beta_max > 0.0 && self.beta_max < FRAC_PI_2) {
            return Err(ValidationError::BetaMax(self.beta_max));
        }
        positive("magnetic.r_min", self.r_min)?;
        positive("magnetic.avoidance_radius", self.avoidance_radius)
    }
}

/// Coulomb force on the pole `q1` at `from` exerted by the pole `q2` at `to`.
///
/// Like charges repel, unlike charges attract. Distances below `r_min` use
/// `r_min` for the magnitude; coincident poles push along +x.
pub fn coulomb_force(q1: f64, q2: f64, from: Vec2, to: Vec2, k: f64, r_min: f64) -> Vec2 {
    let d = from - to;
    let r = d.length();
    let dir = if r > 0.0 { d / r } else { Vec2::X };
    let rc = r.max(r_min);
    // q1 * q2 first so swapping the poles gives the exact negation.
    dir * (k * (q1 * q2) / (rc * rc))
}

/// Sideways acceleration that steers a walker off a collision course.
///
/// `velocity` is the walker's own velocity `V`. Zero when the two are not
/// closing in on each other or the other lies behind (α ≥ π/2).
pub fn avoidance_acceleration(
    velocity: Vec2,
    other_pos: Vec2,
    other_vel: Vec2,
    self_pos: Vec2,
    beta_max: f64,
) -> Vec2 {
    let speed = velocity.length();
    let los = other_pos - self_pos;
    let dist = los.length();
    if speed == 0.0 || dist == 0.0 {
        return Vec2::ZERO;
    }
    let los_unit = los / dist;
    let relative = velocity - other_vel;
    let closing = relative.dot(los_unit);
    if closing <= 0.0 || closing.is_nan() {
        return Vec2::ZERO;
    }
    let cos_alpha = velocity.dot(los_unit) / speed;
    if cos_alpha <= 0.0 {
        return Vec2::ZERO;
    }
    // β in [0, π/2) because the pair is closing.
    let beta = cross(los_unit, relative).abs().atan2(closing).min(beta_max);
    let magnitude = speed * cos_alpha.min(1.0) * beta.tan();
    if magnitude == 0.0 {
        return Vec2::ZERO;
    }
    let left = Vec2::new(-velocity.y, velocity.x) / speed;
    // Other on the left: turn right. Dead ahead: keep right.
    let side = if cross(velocity, los) >= 0.0 {
        -left
    } else {
        left
    };
    side * magnitude
}

/// Per-term breakdown of [`magnetic_acceleration`], all in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MagneticTerms {
    pub goal: Vec2,
    pub pedestrians: Vec2,
    pub obstacles: Vec2,
    pub avoidance: Vec2,
}

impl MagneticTerms {
    pub fn total(&self) -> Vec2 {
        self.goal + self.pedestrians + self.obstacles + self.avoidance
    }

    pub fn named(&self) -> [(&'static str, Vec2); 4] {
        [
            ("goal attraction", self.goal),
            ("pedestrian repulsion", self.pedestrians),
            ("obstacle repulsion", self.obstacles),
            ("avoidance", self.avoidance),
        ]
    }
}

pub fn magnetic_terms<'a>(
    agent: &Agent,
    others: &[Agent],
    obstacles: impl IntoIterator<Item = &'a Obstacle>,
    params: &MagneticParams,
) -> MagneticTerms {
    let k = params.k_coulomb;
    let r_min = params.r_min;
    let inv_m = 1.0 / agent.mass;
    let reach = params.avoidance_radius;

    let goal = coulomb_force(
        agent.charge,
        params.goal_charge,
        agent.position,
        agent.destination,
        k,
        r_min,
    ) * inv_m;

    let mut pedestrians = Vec2::ZERO;
    let mut avoidance = Vec2::ZERO;
    for other in others {
        if other.id == agent.id || other.arrived {
            continue;
        }
        pedestrians += coulomb_force(
            agent.charge,
            other.charge,
            agent.position,
            other.position,
            k,
            r_min,
        );
        if agent.position.distance(other.position) <= reach {
            avoidance += avoidance_acceleration(
                agent.velocity,
                other.position,
                other.velocity,
                agent.position,
                params.beta_max,
            );
        }
    }

    let mut obstacles_f = Vec2::ZERO;
    for o in obstacles {
        let q = o.nearest_point(agent.position);
        obstacles_f += coulomb_force(agent.charge, o.charge, agent.position, q, k, r_min);
        if agent.position.distance(q) <= reach {
            avoidance += avoidance_acceleration(
                agent.velocity,
                q,
                Vec2::ZERO,
                agent.position,
                params.beta_max,
            );
        }
    }

    MagneticTerms {
        goal,
        pedestrians: pedestrians * inv_m,
        obstacles: obstacles_f * inv_m,
        avoidance,
    }
}

/// Total acceleration of `agent`: Coulomb forces from its goal, the other
/// active pedestrians and every obstacle (at its nearest point), divided by
/// mass, plus the avoidance turns.
pub fn magnetic_acceleration<'a>(
    agent: &Agent,
    others: &[Agent],
    obstacles: impl IntoIterator<Item = &'a Obstacle>,
    params: &MagneticParams,
) -> Vec2 {
    magnetic_terms(agent, others, obstacles, params).total()
}
