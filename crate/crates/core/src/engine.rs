//! Time stepping shared by the three models.
//!
//! Continuous models (magnetic, social) use explicit Euler with speed clamp
//! and obstacle projection; the cellular model advances one grid update per
//! tick. Every active agent leaves one [`TrajectoryRecord`] per step, plus
//! one for the initial state at t = 0.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::cellular::{cellular_step, Grid};
use crate::error::{Error, Result, ValidationError};
use crate::geometry::{project_out, Vec2};
use crate::magnetic::magnetic_terms;
use crate::par::{self, Execution};
use crate::rng::SimRng;
use crate::scene::{Agent, AgentId, ModelKind, Scenario};
use crate::social::{draw_fluctuation, social_terms};

/// Projection passes per step; corners may need more than one.
const PROJECTION_PASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub time: f64,
    pub agent_id: AgentId,
    pub position: Vec2,
    pub velocity: Vec2,
}

impl TrajectoryRecord {
    pub fn new(time: f64, agent_id: AgentId, position: Vec2, velocity: Vec2) -> Self {
        TrajectoryRecord {
            time,
            agent_id,
            position,
            velocity,
        }
    }
}

/// Rescales `v` onto the disc of radius `v_max`, keeping its direction.
pub fn clamp_speed(v: Vec2, v_max: f64) -> Vec2 {
    let speed = v.length();
    if speed <= v_max {
        v
    } else {
        v * (v_max / speed)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub time: f64,
    pub steps: u64,
    /// Sorted by id.
    pub agents: Vec<Agent>,
    pub grid: Option<Grid>,
    pub rng: SimRng,
    pub trajectory: Vec<TrajectoryRecord>,
    pub arrival_times: BTreeMap<AgentId, f64>,
    /// Deepest disc overlap between two agents seen so far (m).
    pub max_overlap: f64,
}

impl SimulationState {
    /// Validates the scenario and sets up the initial state. Cellular agents
    /// snap to the centre of the cell they start in, and their destinations
    /// to the centre of the nearest unblocked cell.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut agents = scenario.agents.clone();
        agents.sort_by_key(|a| a.id);

        let mut grid = None;
        if scenario.model == ModelKind::Cellular {
            let mut g = Grid::for_scenario(scenario);
            for (index, a) in agents.iter_mut().enumerate() {
                if a.arrived {
                    continue;
                }
                let cell = g
                    .cell_of(a.position)
                    .ok_or(ValidationError::BlockedCell { index, id: a.id })?;
                g.place(a.id, cell).map_err(|holder| match holder {
                    Some(holder) => ValidationError::SharedCell {
                        index,
                        id: a.id,
                        holder,
                    },
                    None => ValidationError::BlockedCell { index, id: a.id },
                })?;
                a.position = g.center(cell);
                a.velocity = Vec2::ZERO;
                if let Some(goal) = g.nearest_free_cell(a.destination) {
                    a.destination = g.center(goal);
                }
            }
            grid = Some(g);
        }

        let mut state = SimulationState {
            time: 0.0,
            steps: 0,
            agents,
            grid,
            rng: SimRng::new(scenario.seed),
            trajectory: Vec::new(),
            arrival_times: BTreeMap::new(),
            max_overlap: 0.0,
        };
        let active: Vec<usize> = (0..state.agents.len())
            .filter(|&i| !state.agents[i].arrived)
            .collect();
        state.record(&active);
        state.mark_arrivals(scenario, &active);
        state.track_overlap(&active);
        Ok(state)
    }

    pub fn active_count(&self) -> usize {
        self.agents.iter().filter(|a| !a.arrived).count()
    }

    pub fn is_finished(&self, scenario: &Scenario) -> bool {
        self.active_count() == 0 || self.time >= scenario.max_time
    }

    fn record(&mut self, slots: &[usize]) {
        for &i in slots {
            let a = &self.agents[i];
            self.trajectory.push(TrajectoryRecord::new(
                self.time, a.id, a.position, a.velocity,
            ));
        }
    }

    fn mark_arrivals(&mut self, scenario: &Scenario, slots: &[usize]) {
        for &i in slots {
            let a = &mut self.agents[i];
            if a.position.distance(a.destination) <= scenario.arrival_tolerance {
                a.arrived = true;
                self.arrival_times.insert(a.id, self.time);
                if let Some(grid) = self.grid.as_mut() {
                    if let Some(cell) = grid.cell_of(a.position) {
                        grid.vacate(cell);
                    }
                }
            }
        }
    }

    fn track_overlap(&mut self, slots: &[usize]) {
        for (n, &i) in slots.iter().enumerate() {
            for &j in &slots[n + 1..] {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let depth = a.radius + b.radius - a.position.distance(b.position);
                if depth > self.max_overlap {
                    self.max_overlap = depth;
                }
            }
        }
    }
}

/// Seconds per step for the scenario's model.
pub fn step_length(scenario: &Scenario) -> f64 {
    match scenario.model {
        ModelKind::Cellular => scenario.params.cellular.tick,
        _ => scenario.dt,
    }
}

/// Advances the state by one step of the scenario's model.
pub fn step(state: &mut SimulationState, scenario: &Scenario, execution: Execution) -> Result<()> {
    if state.time >= scenario.max_time {
        return Err(Error::Finished(state.time));
    }
    let active: Vec<usize> = (0..state.agents.len())
        .filter(|&i| !state.agents[i].arrived)
        .collect();

    match scenario.model {
        ModelKind::Cellular => {
            let grid = state
                .grid
                .as_mut()
                .expect("cellular state always carries a grid");
            cellular_step(grid, &mut state.agents, &scenario.params.cellular)?;
        }
        ModelKind::Magnetic | ModelKind::Social => {
            continuous_update(state, scenario, &active, execution)?
        }
    }

    state.steps += 1;
    state.time = state.steps as f64 * step_length(scenario);
    state.record(&active);
    state.mark_arrivals(scenario, &active);
    if scenario.model != ModelKind::Cellular {
        state.track_overlap(&active);
    }
    Ok(())
}

fn continuous_update(
    state: &mut SimulationState,
    scenario: &Scenario,
    active: &[usize],
    execution: Execution,
) -> Result<()> {
    let now = state.time;
    let dt = scenario.dt;

    // Noise is drawn up front in ascending id order from the single stream.
    let sigma = scenario.params.social.sigma_xi;
    let noise: Vec<Vec2> = if scenario.model == ModelKind::Social && sigma > 0.0 {
        active
            .iter()
            .map(|_| draw_fluctuation(&mut state.rng, sigma))
            .collect::<Result<_>>()?
    } else {
        vec![Vec2::ZERO; active.len()]
    };

    let work: Vec<(usize, Vec2)> = active.iter().copied().zip(noise).collect();
    let agents = &state.agents;
    let terms: Vec<[(&'static str, Vec2); 4]> = par::map(execution, &work, |&(i, xi)| {
        let a = &agents[i];
        match scenario.model {
            ModelKind::Magnetic => magnetic_terms(
                a,
                agents,
                scenario.all_obstacles(),
                &scenario.params.magnetic,
            )
            .named(),
            _ => social_terms(
                a,
                agents,
                scenario.all_obstacles(),
                &scenario.params.social,
                now,
                xi,
            )
            .named(),
        }
    });

    let mut accelerations = Vec::with_capacity(work.len());
    for (&(i, _), named) in work.iter().zip(&terms) {
        let mut total = Vec2::ZERO;
        for (term, value) in named {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    agent: state.agents[i].id,
                    term,
                    time: now,
                });
            }
            total += *value;
        }
        accelerations.push(total);
    }

    for (&(i, _), acc) in work.iter().zip(accelerations) {
        let agent = &mut state.agents[i];
        let previous = agent.position;
        let mut velocity = clamp_speed(agent.velocity + acc * dt, agent.v_max);
        let mut position = previous + velocity * dt;
        for _ in 0..PROJECTION_PASSES {
            let mut moved = false;
            for o in scenario.all_obstacles() {
                if let Some((p, n)) = project_out(position, agent.radius, o, previous) {
                    position = p;
                    let into = velocity.dot(n);
                    if into < 0.0 {
                        velocity -= n * into;
                    }
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        agent.velocity = velocity;
        agent.position = position;
    }
    Ok(())
}

/// Called every `every` steps with the state after the step.
pub type ProgressHook<'a> = Box<dyn FnMut(&SimulationState) + 'a>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Arrival time per agent id; `None` for agents still walking at the end.
    pub arrival_times: BTreeMap<AgentId, Option<f64>>,
    pub steps: u64,
    pub final_time: f64,
    pub timed_out: bool,
    pub max_overlap: f64,
    pub wall_clock: Duration,
}

impl RunSummary {
    pub fn arrived(&self) -> usize {
        self.arrival_times.values().filter(|t| t.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Vec<TrajectoryRecord>,
    pub summary: RunSummary,
}

/// Runs a scenario to completion with configurable execution and progress
/// reporting.
pub struct Runner<'a> {
    scenario: &'a Scenario,
    execution: Execution,
    progress: Option<(u64, ProgressHook<'a>)>,
}

impl<'a> Runner<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Runner {
            scenario,
            execution: Execution::default(),
            progress: None,
        }
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn progress(mut self, every: u64, hook: impl FnMut(&SimulationState) + 'a) -> Self {
        self.progress = Some((every.max(1), Box::new(hook)));
        self
    }

    pub fn run(mut self) -> Result<RunOutput> {
        let started = Instant::now();
        let scenario = self.scenario;
        let mut state = SimulationState::new(scenario)?;
        while !state.is_finished(scenario) {
            step(&mut state, scenario, self.execution)?;
            if let Some((every, hook)) = self.progress.as_mut() {
                if state.steps % *every == 0 {
                    hook(&state);
                }
            }
        }
        let arrival_times = state
            .agents
            .iter()
            .map(|a| (a.id, state.arrival_times.get(&a.id).copied()))
            .collect();
        let summary = RunSummary {
            arrival_times,
            steps: state.steps,
            final_time: state.time,
            timed_out: state.active_count() > 0,
            max_overlap: state.max_overlap,
            wall_clock: started.elapsed(),
        };
        Ok(RunOutput {
            trajectory: state.trajectory,
            summary,
        })
    }
}

/// Runs until every agent has arrived or `max_time` is reached.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    Runner::new(scenario).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Obstacle, Rect};

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn open(model: ModelKind) -> Scenario {
        let mut s = Scenario::new(model, Rect::new(v(0.0, 0.0), v(20.0, 4.0)));
        s.max_time = 30.0;
        s
    }

    #[test]
    fn clamp_speed_examples() {
        assert_eq!(clamp_speed(v(0.3, 0.4), 2.0), v(0.3, 0.4));
        assert_eq!(clamp_speed(v(3.0, 4.0), 2.5), v(1.5, 2.0));
        assert_eq!(clamp_speed(Vec2::ZERO, 1.0), Vec2::ZERO);
    }

    #[test]
    fn empty_scene_only_advances_time() {
        let s = open(ModelKind::Social);
        let mut st = SimulationState::new(&s).unwrap();
        step(&mut st, &s, Execution::Sequential).unwrap();
        assert_eq!(st.time, s.dt);
        assert!(st.trajectory.is_empty());
    }

    #[test]
    fn cruising_agent_moves_v0_dt() {
        let mut s = open(ModelKind::Social);
        let a = Agent::new(0, v(2.0, 2.0), v(12.0, 2.0))
            .with_target_time(10.0 / 1.25)
            .with_velocity(v(1.25, 0.0));
        s.agents.push(a);
        let mut st = SimulationState::new(&s).unwrap();
        step(&mut st, &s, Execution::Sequential).unwrap();
        assert_eq!(st.agents[0].position, v(2.0 + 1.25 * s.dt, 2.0));
        assert_eq!(st.agents[0].velocity, v(1.25, 0.0));
    }

    #[test]
    fn arrived_agent_stops_recording() {
        let mut s = open(ModelKind::Social);
        s.agents.push(Agent::new(0, v(2.0, 2.0), v(2.2, 2.0)));
        s.agents.push(Agent::new(1, v(5.0, 2.0), v(15.0, 2.0)));
        let mut st = SimulationState::new(&s).unwrap();
        assert!(st.agents[0].arrived);
        assert_eq!(st.arrival_times[&0], 0.0);
        step(&mut st, &s, Execution::Sequential).unwrap();
        step(&mut st, &s, Execution::Sequential).unwrap();
        assert_eq!(st.trajectory.iter().filter(|r| r.agent_id == 0).count(), 1);
        assert_eq!(st.agents[0].position, v(2.0, 2.0));
        assert_eq!(st.trajectory.iter().filter(|r| r.agent_id == 1).count(), 3);
    }

    #[test]
    fn timeout_path() {
        let mut s = open(ModelKind::Magnetic);
        s.max_time = 0.1;
        s.agents.push(Agent::new(0, v(1.0, 2.0), v(19.0, 2.0)));
        let out = run(&s).unwrap();
        assert!(out.summary.timed_out);
        assert_eq!(out.summary.arrival_times[&0], None);
        assert_eq!(out.summary.steps, 2);
    }

    #[test]
    fn step_after_max_time_is_an_error() {
        let mut s = open(ModelKind::Social);
        s.max_time = 0.1;
        s.agents.push(Agent::new(0, v(1.0, 2.0), v(19.0, 2.0)));
        let mut st = SimulationState::new(&s).unwrap();
        step(&mut st, &s, Execution::Sequential).unwrap();
        step(&mut st, &s, Execution::Sequential).unwrap();
        assert!(matches!(
            step(&mut st, &s, Execution::Sequential),
            Err(Error::Finished(_))
        ));
    }

    #[test]
    fn non_finite_force_names_agent_and_term() {
        let mut s = open(ModelKind::Social);
        s.params.social.a = 1e300;
        s.params.social.b = 0.01;
        s.agents.push(Agent::new(3, v(5.0, 2.0), v(15.0, 2.0)));
        s.agents.push(Agent::new(4, v(5.0, 2.1), v(15.0, 2.1)));
        let err = run(&s).unwrap_err();
        match err {
            Error::NonFinite { agent, term, time } => {
                assert_eq!(agent, 3);
                assert_eq!(term, "pedestrian repulsion");
                assert_eq!(time, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wall_projection_keeps_clearance() {
        let mut s = open(ModelKind::Magnetic);
        s.walls.push(Obstacle::segment(v(0.0, 1.0), v(20.0, 1.0)));
        // Goal on the far side of the wall drags the agent into it.
        s.agents.push(Agent::new(0, v(5.0, 2.0), v(5.0, 0.2)));
        s.max_time = 5.0;
        let out = run(&s).unwrap();
        for r in &out.trajectory {
            assert!(s.walls[0].distance_to(r.position) >= 0.25 - 1e-6, "{r:?}");
        }
    }

    #[test]
    fn cellular_positions_are_cell_centres() {
        let mut s = open(ModelKind::Cellular);
        s.agents.push(Agent::new(0, v(2.0, 2.0), v(12.0, 2.0)));
        let out = run(&s).unwrap();
        let grid = Grid::for_scenario(&s);
        for r in &out.trajectory {
            let c = grid.cell_of(r.position).unwrap();
            assert_eq!(grid.center(c), r.position);
        }
        assert!(!out.summary.timed_out);
    }

    #[test]
    fn cellular_start_conflicts_rejected() {
        let mut s = open(ModelKind::Cellular);
        s.agents.push(Agent::new(0, v(2.1, 2.1), v(12.0, 2.0)));
        s.agents.push(Agent::new(1, v(2.2, 2.2), v(12.0, 2.0)));
        let err = SimulationState::new(&s).unwrap_err();
        assert!(matches!(
            err,
            Error::Validation(ValidationError::SharedCell {
                id: 1,
                holder: 0,
                ..
            })
        ));
    }

    #[test]
    fn progress_hook_fires() {
        let mut s = open(ModelKind::Social);
        s.max_time = 1.0;
        s.agents.push(Agent::new(0, v(1.0, 2.0), v(19.0, 2.0)));
        let mut calls = Vec::new();
        Runner::new(&s)
            .progress(5, |st| calls.push(st.steps))
            .run()
            .unwrap();
        assert_eq!(calls, vec![5, 10, 15, 20]);
    }
}
