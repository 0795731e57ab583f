//! Parameter calibration against reference trajectories.
//!
//! Exhaustive grid search: the scenario is re-simulated at every point of a
//! cartesian parameter grid and scored by positional RMSE against the
//! reference. Noise is switched off for every run so the sweep is
//! reproducible.

use std::collections::BTreeSet;

use crate::engine::{Runner, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::metrics::{sample, tracks};
use crate::par::{self, Execution};
use crate::rng::SimRng;
use crate::scene::{AgentId, Scenario};

/// Ordered parameter axes. Points are enumerated row-major: the last axis
/// varies fastest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<f64>)>,
}

/// One assignment of values to the grid's parameter names.
pub type GridPoint = Vec<(String, f64)>;

impl ParamGrid {
    pub fn new() -> Self {
        ParamGrid::default()
    }

    pub fn axis(mut self, name: &str, values: impl IntoIterator<Item = f64>) -> Self {
        self.axes
            .push((name.to_string(), values.into_iter().collect()));
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.axes.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rejects empty axes, repeated names and names the scenario's model does
    /// not know.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::invalid("grid", "no parameter axes"));
        }
        let mut seen = BTreeSet::new();
        for (name, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::invalid(
                    "grid",
                    format!("axis `{name}` has no values"),
                ));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(
                    "grid",
                    format!("axis `{name}` appears twice"),
                ));
            }
            let mut probe = scenario.params.clone();
            probe.set(scenario.model, name, values[0])?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out: Vec<GridPoint> = vec![Vec::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((name.clone(), v));
                        p
                    })
                })
                .collect();
        }
        if self.axes.is_empty() {
            out.clear();
        }
        out
    }
}

/// Copy of `scenario` with the point's parameters substituted and noise off.
pub fn apply_point(scenario: &Scenario, point: &GridPoint) -> Result<Scenario> {
    let mut s = scenario.clone();
    for (name, value) in point {
        s.params.set(s.model, name, *value)?;
    }
    s.params.social.sigma_xi = 0.0;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFit {
    pub position_rmse: f64,
    pub velocity_rmse: f64,
    pub samples: usize,
}

/// RMS positional and velocity deviation over every reference record,
/// comparing against the simulated track interpolated at the reference time.
/// A simulated agent that has already arrived is held at its last record.
pub fn trajectory_fit(
    sim: &[TrajectoryRecord],
    reference: &[TrajectoryRecord],
) -> Result<TrajectoryFit> {
    if reference.is_empty() {
        return Err(Error::Trajectory("reference trajectory is empty".into()));
    }
    let sim_tracks = tracks(sim);
    let mut pos2 = 0.0;
    let mut vel2 = 0.0;
    for r in reference {
        let track = sim_tracks.get(&r.agent_id).ok_or_else(|| {
            Error::Trajectory(format!(
                "agent {} is missing from the simulated trajectory",
                r.agent_id
            ))
        })?;
        let t = r.time.clamp(track[0].time, track[track.len() - 1].time);
        let (p, v) = sample(track, t).expect("clamped time lies inside the track");
        pos2 += p.distance_squared(r.position);
        vel2 += v.distance_squared(r.velocity);
    }
    let n = reference.len() as f64;
    Ok(TrajectoryFit {
        position_rmse: (pos2 / n).sqrt(),
        velocity_rmse: (vel2 / n).sqrt(),
        samples: reference.len(),
    })
}

/// Root-mean-square positional deviation of `sim` from `reference` (m).
pub fn trajectory_rmse(sim: &[TrajectoryRecord], reference: &[TrajectoryRecord]) -> Result<f64> {
    Ok(trajectory_fit(sim, reference)?.position_rmse)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub point: GridPoint,
    /// Infinite when the run aborted.
    pub position_rmse: f64,
    pub velocity_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub reference_id: String,
    pub best_params: GridPoint,
    pub best_error: f64,
    pub best_velocity_error: f64,
    /// Every grid point in row-major order.
    pub error_table: Vec<FitRow>,
    /// RMSE at the best point against held-out reference agents, if any.
    pub holdout_error: Option<f64>,
    pub holdout_agents: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub execution: Execution,
    pub reference_id: String,
    /// Fraction of reference agents (highest ids) kept out of the fit.
    pub holdout_fraction: Option<f64>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            execution: Execution::default(),
            reference_id: "reference".into(),
            holdout_fraction: None,
        }
    }
}

/// Splits the reference by agent id: the highest `ceil(fraction × n)` ids
/// are held out, but at least one agent always stays in the fit.
pub fn split_holdout(
    reference: &[TrajectoryRecord],
    fraction: f64,
) -> Result<(Vec<TrajectoryRecord>, Vec<TrajectoryRecord>, Vec<AgentId>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(
            "holdout_fraction",
            format!("must lie in [0, 1), got {fraction}"),
        ));
    }
    let ids: Vec<AgentId> = tracks(reference).keys().copied().collect();
    let n_hold = ((fraction * ids.len() as f64).ceil() as usize).min(ids.len().saturating_sub(1));
    let held: BTreeSet<AgentId> = ids[ids.len() - n_hold..].iter().copied().collect();
    let (hold, train): (Vec<_>, Vec<_>) =
        reference.iter().partition(|r| held.contains(&r.agent_id));
    Ok((train, hold, held.into_iter().collect()))
}

fn evaluate(
    scenario: &Scenario,
    point: &GridPoint,
    reference: &[TrajectoryRecord],
    execution: Execution,
) -> Result<FitRow> {
    let s = apply_point(scenario, point)?;
    let fit = match Runner::new(&s).execution(execution).run() {
        Ok(out) => trajectory_fit(&out.trajectory, reference)?,
        Err(Error::NonFinite { .. }) => TrajectoryFit {
            position_rmse: f64::INFINITY,
            velocity_rmse: f64::INFINITY,
            samples: 0,
        },
        Err(e) => return Err(e),
    };
    Ok(FitRow {
        point: point.clone(),
        position_rmse: fit.position_rmse,
        velocity_rmse: fit.velocity_rmse,
    })
}

/// Grid search for the parameters that best reproduce `reference`.
///
/// Every substituted scenario is validated before anything runs. Runs that
/// abort on non-finite forces score infinity. Ties go to the earliest point
/// in row-major order.
pub fn calibrate_with(
    scenario: &Scenario,
    grid: &ParamGrid,
    reference: &[TrajectoryRecord],
    options: &CalibrationOptions,
) -> Result<FitReport> {
    grid.validate(scenario)?;
    let points = grid.points();
    for p in &points {
        apply_point(scenario, p)?.validate()?;
    }

    let (train, hold, holdout_agents) = match options.holdout_fraction {
        Some(f) => split_holdout(reference, f)?,
        None => (reference.to_vec(), Vec::new(), Vec::new()),
    };

    // Points run in parallel; each run itself stays sequential.
    let rows: Vec<FitRow> = par::map(options.execution, &points, |p| {
        evaluate(scenario, p, &train, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.position_rmse < rows[best].position_rmse {
            best = i;
        }
    }
    let best_row = rows[best].clone();
    let holdout_error = if hold.is_empty() {
        None
    } else {
        Some(evaluate(scenario, &best_row.point, &hold, Execution::Sequential)?.position_rmse)
    };

    Ok(FitReport {
        reference_id: options.reference_id.clone(),
        best_params: best_row.point,
        best_error: best_row.position_rmse,
        best_velocity_error: best_row.velocity_rmse,
        error_table: rows,
        holdout_error,
        holdout_agents,
    })
}

pub fn calibrate(
    scenario: &Scenario,
    grid: &ParamGrid,
    reference: &[TrajectoryRecord],
) -> Result<FitReport> {
    calibrate_with(scenario, grid, reference, &CalibrationOptions::default())
}

/// Adds independent uniform offsets in `[-amplitude, amplitude]` to each
/// position component; used to build noisy synthetic references.
pub fn jitter_positions(
    trajectory: &[TrajectoryRecord],
    amplitude: f64,
    seed: u64,
) -> Vec<TrajectoryRecord> {
    let mut rng = SimRng::new(seed);
    trajectory
        .iter()
        .map(|r| {
            let mut r = *r;
            r.position.x += rng.uniform(-amplitude, amplitude);
            r.position.y += rng.uniform(-amplitude, amplitude);
            r
        })
        .collect()
}
