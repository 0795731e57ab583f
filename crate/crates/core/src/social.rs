//! Social force model.
//!
//! Acceleration is relaxation toward the intended velocity over `tau`, plus
//! exponential repulsion from other pedestrians and from boundaries, plus an
//! optional Gaussian fluctuation.

use crate::error::{Result, ValidationError};
use crate::geometry::{unit_or, Obstacle, Vec2};
use crate::rng::SimRng;
use crate::scene::{non_negative, positive, Agent};

#[derive(Debug, Clone, PartialEq)]
pub struct SocialParams {
    /// Relaxation time (s).
    pub tau: f64,
    /// Pedestrian repulsion strength (m/s²).
    pub a: f64,
    /// Pedestrian repulsion range (m).
    pub b: f64,
    /// Per-component standard deviation of the fluctuation (m/s²).
    pub sigma_xi: f64,
    pub wall_a: f64,
    pub wall_b: f64,
}

impl Default for SocialParams {
    fn default() -> Self {
        SocialParams {
            tau: 0.5,
            a: 2.0,
            b: 0.3,
            sigma_xi: 0.0,
            wall_a: 10.0,
            wall_b: 0.2,
        }
    }
}

impl SocialParams {
    pub const NAMES: [&'static str; 6] = ["tau", "a", "b", "sigma_xi", "wall_a", "wall_b"];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "tau" => self.tau,
            "a" => self.a,
            "b" => self.b,
            "sigma_xi" => self.sigma_xi,
            "wall_a" => self.wall_a,
            "wall_b" => self.wall_b,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "tau" => &mut self.tau,
            "a" => &mut self.a,
            "b" => &mut self.b,
            "sigma_xi" => &mut self.sigma_xi,
            "wall_a" => &mut self.wall_a,
            "wall_b" => &mut self.wall_b,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        positive("social.tau", self.tau)?;
        non_negative("social.a", self.a)?;
        positive("social.b", self.b)?;
        non_negative("social.sigma_xi", self.sigma_xi)?;
        non_negative("social.wall_a", self.wall_a)?;
        positive("social.wall_b", self.wall_b)
    }
}

/// Remaining distance over remaining time, clamped to `[v_min, v_max]`.
/// Agents past their target time walk at `v_max`.
pub fn intended_speed(
    position: Vec2,
    destination: Vec2,
    target_time: f64,
    now: f64,
    v_max: f64,
    v_min: f64,
) -> f64 {
    let remaining_time = target_time - now;
    if remaining_time <= 0.0 {
        return v_max;
    }
    (position.distance(destination) / remaining_time).clamp(v_min, v_max)
}

/// Relaxation term `m (v0 e - v) / tau`, with `e` the unit vector to the
/// destination.
pub fn driving_force(agent: &Agent, v0: f64, tau: f64) -> Vec2 {
    let e = unit_or(agent.destination - agent.position, Vec2::ZERO);
    (e * v0 - agent.velocity) * (agent.mass / tau)
}

/// Repulsion of `other` on `this`: `m A exp((r_i + r_j - d) / B)` along the
/// line from `other` to `this`. Coincident agents push along +x.
pub fn pair_force(this: &Agent, other: &Agent, a: f64, b: f64) -> Vec2 {
    let diff = this.position - other.position;
    let d = diff.length();
    let n = if d > 0.0 { diff / d } else { Vec2::X };
    n * (this.mass * a * ((this.radius + other.radius - d) / b).exp())
}

/// Summed repulsion of every obstacle and wall, each acting from its nearest
/// point. An agent exactly on a wall is pushed along +x.
pub fn boundary_force<'a>(
    agent: &Agent,
    obstacles: impl IntoIterator<Item = &'a Obstacle>,
    wall_a: f64,
    wall_b: f64,
) -> Vec2 {
    let mut total = Vec2::ZERO;
    for o in obstacles {
        let q = o.nearest_point(agent.position);
        let diff = agent.position - q;
        let d = diff.length();
        let n = if d > 0.0 { diff / d } else { Vec2::X };
        total += n * (agent.mass * wall_a * ((agent.radius - d) / wall_b).exp());
    }
    total
}

/// Per-term breakdown of [`social_acceleration`], all in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SocialTerms {
    pub driving: Vec2,
    pub pedestrians: Vec2,
    pub boundaries: Vec2,
    pub fluctuation: Vec2,
}

impl SocialTerms {
    pub fn total(&self) -> Vec2 {
        self.driving + self.pedestrians + self.boundaries + self.fluctuation
    }

    pub fn named(&self) -> [(&'static str, Vec2); 4] {
        [
            ("driving", self.driving),
            ("pedestrian repulsion", self.pedestrians),
            ("boundary repulsion", self.boundaries),
            ("fluctuation", self.fluctuation),
        ]
    }
}

/// Deterministic part of the acceleration; `fluctuation` is passed through.
pub fn social_terms<'a>(
    agent: &Agent,
    others: &[Agent],
    obstacles: impl IntoIterator<Item = &'a Obstacle>,
    params: &SocialParams,
    now: f64,
    fluctuation: Vec2,
) -> SocialTerms {
    let inv_m = 1.0 / agent.mass;
    let v0 = intended_speed(
        agent.position,
        agent.destination,
        agent.target_time,
        now,
        agent.v_max,
        agent.v_min,
    );
    let mut pedestrians = Vec2::ZERO;
    for other in others {
        if other.id != agent.id && !other.arrived {
            pedestrians += pair_force(agent, other, params.a, params.b);
        }
    }
    SocialTerms {
        driving: driving_force(agent, v0, params.tau) * inv_m,
        pedestrians: pedestrians * inv_m,
        boundaries: boundary_force(agent, obstacles, params.wall_a, params.wall_b) * inv_m,
        fluctuation,
    }
}

/// Draws the fluctuation vector: x then y, each with standard deviation `sigma_xi`.
pub fn draw_fluctuation(rng: &mut SimRng, sigma_xi: f64) -> Result<Vec2> {
    let x = rng.draw_gaussian(sigma_xi)?;
    let y = rng.draw_gaussian(sigma_xi)?;
    Ok(Vec2::new(x, y))
}

/// Full acceleration of `agent` at time `now`. Draws two deviates from `rng`.
pub fn social_acceleration<'a>(
    agent: &Agent,
    others: &[Agent],
    obstacles: impl IntoIterator<Item = &'a Obstacle>,
    params: &SocialParams,
    now: f64,
    rng: &mut SimRng,
) -> Result<Vec2> {
    let xi = draw_fluctuation(rng, params.sigma_xi)?;
    Ok(social_terms(agent, others, obstacles, params, now, xi).total())
}
