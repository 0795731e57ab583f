//! Benefit-cost cellular model.
//!
//! Pedestrians live on a square grid, at most one per cell. Each tick every
//! pedestrian scores the nine cells around it (its own included) by the gain
//! toward its destination minus the repulsion of nearby pedestrians, and
//! moves to the best one. Updates are sequential in ascending agent id.

use crate::error::{Error, Result, ValidationError};
use crate::geometry::{distance, Vec2};
use crate::scene::{non_negative, positive, Agent, AgentId, Scenario};

/// Score assigned to cells an agent may not enter.
pub const INADMISSIBLE: f64 = f64::NEG_INFINITY;

/// Index of the stay cell within [`Grid::neighborhood`].
pub const STAY: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CellularParams {
    /// Gain scale `K`.
    pub k: f64,
    /// Distance of strongest repulsion (m).
    pub alpha: f64,
    /// Repulsion softening; `1/beta` is the largest possible cost.
    pub beta: f64,
    /// Pedestrians farther than this from a candidate cell contribute nothing (m).
    pub field_radius: f64,
    pub cell_size: f64,
    /// Duration of one update (s).
    pub tick: f64,
}

impl Default for CellularParams {
    fn default() -> Self {
        CellularParams {
            k: 10.0,
            alpha: 0.7,
            beta: 0.5,
            field_radius: 2.5,
            cell_size: 0.5,
            tick: 0.5,
        }
    }
}

impl CellularParams {
    pub const NAMES: [&'static str; 6] =
        ["k", "alpha", "beta", "field_radius", "cell_size", "tick"];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "k" => self.k,
            "alpha" => self.alpha,
            "beta" => self.beta,
            "field_radius" => self.field_radius,
            "cell_size" => self.cell_size,
            "tick" => self.tick,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "k" => &mut self.k,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "field_radius" => &mut self.field_radius,
            "cell_size" => &mut self.cell_size,
            "tick" => &mut self.tick,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        positive("cellular.k", self.k)?;
        non_negative("cellular.alpha", self.alpha)?;
        positive("cellular.beta", self.beta)?;
        positive("cellular.field_radius", self.field_radius)?;
        positive("cellular.cell_size", self.cell_size)?;
        positive("cellular.tick", self.tick)?;
        if self.field_radius < self.cell_size {
            return Err(ValidationError::FieldRadius {
                field_radius: self.field_radius,
                cell_size: self.cell_size,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Cell { col, row }
    }
}

/// Occupancy grid. Cell `(col, row)` spans
/// `origin + [col, col+1) × [row, row+1)` in units of `cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    occupancy: Vec<Option<AgentId>>,
    blocked: Vec<bool>,
}

impl Grid {
    pub fn new(origin: Vec2, cell_size: f64, width: usize, height: usize) -> Self {
        Grid {
            origin,
            cell_size,
            width,
            height,
            occupancy: vec![None; width * height],
            blocked: vec![false; width * height],
        }
    }

    /// Grid covering the scenario bounds. A cell is blocked when any obstacle
    /// or wall passes closer to its centre than half a cell.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let cs = scenario.params.cellular.cell_size;
        let b = scenario.bounds;
        let width = ((b.width() / cs).ceil() as usize).max(1);
        let height = ((b.height() / cs).ceil() as usize).max(1);
        let mut grid = Grid::new(b.min, cs, width, height);
        for row in 0..height {
            for col in 0..width {
                let c = Cell::new(col, row);
                let centre = grid.center(c);
                if scenario
                    .all_obstacles()
                    .any(|o| o.contains(centre) || o.distance_to(centre) < 0.5 * cs)
                {
                    grid.block(c);
                }
            }
        }
        grid
    }

    fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| Cell::new(col, row)))
    }

    pub fn center(&self, cell: Cell) -> Vec2 {
        self.origin + Vec2::new(cell.col as f64 + 0.5, cell.row as f64 + 0.5) * self.cell_size
    }

    /// Cell containing `p`, if inside the grid. Points on the max edge of
    /// the grid belong to the last row/column.
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let rel = (p - self.origin) / self.cell_size;
        if !(rel.x >= 0.0 && rel.y >= 0.0) {
            return None;
        }
        let col = (rel.x.floor() as usize).min(self.width - 1);
        let row = (rel.y.floor() as usize).min(self.height - 1);
        if rel.x > self.width as f64 || rel.y > self.height as f64 {
            return None;
        }
        Some(Cell::new(col, row))
    }

    pub fn block(&mut self, cell: Cell) {
        let i = self.index(cell);
        self.blocked[i] = true;
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.index(cell)]
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|c| self.is_blocked(*c))
    }

    pub fn occupant(&self, cell: Cell) -> Option<AgentId> {
        self.occupancy[self.index(cell)]
    }

    /// Every occupied cell with its occupant, in row-major order.
    pub fn occupied(&self) -> impl Iterator<Item = (Cell, AgentId)> + '_ {
        self.cells()
            .filter_map(|c| self.occupant(c).map(|id| (c, id)))
    }

    /// Puts `id` into an empty, unblocked cell.
    pub fn place(&mut self, id: AgentId, cell: Cell) -> Result<(), Option<AgentId>> {
        let i = self.index(cell);
        if self.blocked[i] {
            return Err(None);
        }
        if let Some(holder) = self.occupancy[i] {
            return Err(Some(holder));
        }
        self.occupancy[i] = Some(id);
        Ok(())
    }

    pub fn vacate(&mut self, cell: Cell) {
        let i = self.index(cell);
        self.occupancy[i] = None;
    }

    /// The nine cells around `cell` in row-major order (row below first,
    /// then left to right); `None` where the neighbourhood leaves the grid.
    /// Entry [`STAY`] is `cell` itself.
    pub fn neighborhood(&self, cell: Cell) -> [Option<Cell>; 9] {
        let mut out = [None; 9];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let col = cell.col as i64 + dx;
                let row = cell.row as i64 + dy;
                if col >= 0
                    && row >= 0
                    && (col as usize) < self.width
                    && (row as usize) < self.height
                {
                    out[((dy + 1) * 3 + dx + 1) as usize] =
                        Some(Cell::new(col as usize, row as usize));
                }
            }
        }
        out
    }

    /// Unblocked cell whose centre is nearest to `p`; ties go to the lowest
    /// row-major index.
    pub fn nearest_free_cell(&self, p: Vec2) -> Option<Cell> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for c in self.cells() {
            if self.is_blocked(c) {
                continue;
            }
            let d = distance(self.center(c), p);
            if d < best_d {
                best_d = d;
                best = Some(c);
            }
        }
        best
    }
}

/// Gain for stepping from `current` to `target` when heading to `destination`.
///
/// Equals `k · cos θ · |cos θ|` for the angle θ between the step and the
/// direction of the destination, so it lies in `[-k, k]`. Staying put scores 0.
pub fn benefit_score(target: Vec2, current: Vec2, destination: Vec2, k: f64) -> Result<f64> {
    let to_dest = destination - current;
    if to_dest == Vec2::ZERO {
        return Err(Error::invalid(
            "destination",
            "agent is already at its destination",
        ));
    }
    let step = target - current;
    if step == Vec2::ZERO {
        return Ok(0.0);
    }
    let p = step.dot(to_dest);
    Ok(k * p * p.abs() / (step.length_squared() * to_dest.length_squared()))
}

/// Cost of a pedestrian at distance `delta` from a candidate cell.
pub fn repulsion_score(delta: f64, alpha: f64, beta: f64) -> f64 {
    let off = delta - alpha;
    -1.0 / (off * off + beta)
}

/// Net score of `target` for `agent`: gain plus the repulsion of every other
/// active pedestrian within the field radius. Blocked cells, cells held by
/// someone else and cells outside the grid are [`INADMISSIBLE`].
pub fn cell_score(
    grid: &Grid,
    agent: &Agent,
    agents: &[Agent],
    target: Cell,
    params: &CellularParams,
) -> Result<f64> {
    if target.col >= grid.width || target.row >= grid.height || grid.is_blocked(target) {
        return Ok(INADMISSIBLE);
    }
    if matches!(grid.occupant(target), Some(id) if id != agent.id) {
        return Ok(INADMISSIBLE);
    }
    let s = grid.center(target);
    let mut score = benefit_score(s, agent.position, agent.destination, params.k)?;
    for other in agents {
        if other.id == agent.id || other.arrived {
            continue;
        }
        let delta = distance(s, other.position);
        if delta <= params.field_radius {
            score += repulsion_score(delta, params.alpha, params.beta);
        }
    }
    Ok(score)
}

/// Index into the neighbourhood of the best-scoring cell. Ties keep the stay
/// cell, then the lowest row-major index.
pub fn choose(scores: &[f64; 9]) -> usize {
    let mut best = STAY;
    for i in 0..9 {
        if i != STAY && scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

/// One tick: every active agent, in ascending id order, moves to the best
/// cell of its nine-cell neighbourhood. Positions snap to cell centres and
/// velocities become displacement per tick.
///
/// Agents already at their destination point stay put.
pub fn cellular_step(grid: &mut Grid, agents: &mut [Agent], params: &CellularParams) -> Result<()> {
    let mut order: Vec<usize> = (0..agents.len()).filter(|&i| !agents[i].arrived).collect();
    order.sort_by_key(|&i| agents[i].id);

    for i in order {
        let agent = &agents[i];
        let here = grid.cell_of(agent.position).ok_or_else(|| {
            Error::invalid("position", format!("agent {} is off the grid", agent.id))
        })?;
        if agent.position == agent.destination {
            agents[i].velocity = Vec2::ZERO;
            continue;
        }
        let hood = grid.neighborhood(here);
        let mut scores = [INADMISSIBLE; 9];
        for (slot, cell) in hood.iter().enumerate() {
            if let Some(c) = cell {
                scores[slot] = cell_score(grid, agent, agents, *c, params)?;
            }
        }
        let to = hood[choose(&scores)].expect("chosen cell is inside the grid");
        let old = agents[i].position;
        if to != here {
            grid.vacate(here);
            grid.place(agents[i].id, to)
                .expect("chosen cell is free and unblocked");
        }
        let new = grid.center(to);
        agents[i].position = new;
        agents[i].velocity = (new - old) / params.tick;
    }
    Ok(())
}
