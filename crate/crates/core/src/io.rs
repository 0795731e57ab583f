//! File formats: scenario documents (TOML), trajectory tables (CSV),
//! calibration grids and reports.
//!
//! Trajectory files are canonical text: header `time,agent_id,x,y,vx,vy`,
//! one record per line, rows sorted by `(time, agent_id)`, every real
//! rendered with 9 significant digits in `%g` style. Two runs that produce
//! the same records produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{FitReport, ParamGrid};
use crate::cellular::{CellularParams, Grid};
use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result, ValidationError};
use crate::geometry::{Obstacle, Rect, Vec2};
use crate::magnetic::MagneticParams;
use crate::metrics::MeasureRegion;
use crate::scene::{Agent, ModelKind, ModelParams, Scenario};
use crate::social::SocialParams;

pub const TRAJECTORY_HEADER: &str = "time,agent_id,x,y,vx,vy";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}unknown key `{path}`", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    UnknownKey { path: String, line: Option<usize> },

    #[error("{0}")]
    Invalid(#[from] ValidationError),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

/// Options for reading scenario documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject keys the format does not define.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModelName {
    Cellular,
    Magnetic,
    Social,
}

impl From<ModelName> for ModelKind {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Cellular => ModelKind::Cellular,
            ModelName::Magnetic => ModelKind::Magnetic,
            ModelName::Social => ModelKind::Social,
        }
    }
}

impl From<ModelKind> for ModelName {
    fn from(m: ModelKind) -> Self {
        match m {
            ModelKind::Cellular => ModelName::Cellular,
            ModelKind::Magnetic => ModelName::Magnetic,
            ModelKind::Social => ModelName::Social,
        }
    }
}

type Point = [f64; 2];

fn vec2(p: Point) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn point(v: Vec2) -> Point {
    [v.x, v.y]
}

/// On-disk scenario document. Optional fields fall back to the library
/// defaults; serialization always writes every field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    model: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    max_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_tolerance: Option<f64>,
    bounds: BoundsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cellular: Option<CellularFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    magnetic: Option<MagneticFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    social: Option<SocialFile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    regions: BTreeMap<String, String>,
    #[serde(default)]
    agents: Vec<AgentFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    obstacles: Vec<ObstacleFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    walls: Vec<ObstacleFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoundsFile {
    min: Point,
    max: Point,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CellularFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cell_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tick: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MagneticFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_coulomb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal_charge: Option<f64>,
    /// Degrees in the file, radians in memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_max_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avoidance_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SocialFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgentFile {
    id: u32,
    position: Point,
    destination: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocity: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    charge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrived: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObstacleFile {
    vertices: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    charge: Option<f64>,
}

impl ScenarioFile {
    fn into_scenario(self) -> std::result::Result<Scenario, ParseError> {
        let mut params = ModelParams::default();
        if let Some(c) = self.cellular {
            let p = &mut params.cellular;
            if let Some(v) = c.k {
                p.k = v;
            }
            if let Some(v) = c.alpha {
                p.alpha = v;
            }
            if let Some(v) = c.beta {
                p.beta = v;
            }
            if let Some(v) = c.field_radius {
                p.field_radius = v;
            }
            if let Some(v) = c.cell_size {
                p.cell_size = v;
            }
            if let Some(v) = c.tick {
                p.tick = v;
            }
        }
        if let Some(m) = self.magnetic {
            let p = &mut params.magnetic;
            if let Some(v) = m.k_coulomb {
                p.k_coulomb = v;
            }
            if let Some(v) = m.goal_charge {
                p.goal_charge = v;
            }
            if let Some(v) = m.beta_max_deg {
                p.beta_max = v.to_radians();
            }
            if let Some(v) = m.r_min {
                p.r_min = v;
            }
            if let Some(v) = m.avoidance_radius {
                p.avoidance_radius = v;
            }
        }
        if let Some(s) = self.social {
            let p = &mut params.social;
            if let Some(v) = s.tau {
                p.tau = v;
            }
            if let Some(v) = s.a {
                p.a = v;
            }
            if let Some(v) = s.b {
                p.b = v;
            }
            if let Some(v) = s.sigma_xi {
                p.sigma_xi = v;
            }
            if let Some(v) = s.wall_a {
                p.wall_a = v;
            }
            if let Some(v) = s.wall_b {
                p.wall_b = v;
            }
        }

        let mut scenario = Scenario::new(
            self.model.into(),
            Rect::new(vec2(self.bounds.min), vec2(self.bounds.max)),
        );
        scenario.params = params;
        scenario.max_time = self.max_time;
        if let Some(v) = self.dt {
            scenario.dt = v;
        }
        if let Some(v) = self.seed {
            scenario.seed = v;
        }
        if let Some(v) = self.arrival_tolerance {
            scenario.arrival_tolerance = v;
        }

        for (name, spec) in self.regions {
            let region: MeasureRegion = spec.parse().map_err(|e: Error| ParseError::Syntax {
                line: 0,
                column: 0,
                message: format!("regions.{name}: {e}"),
            })?;
            scenario.regions.insert(name, region);
        }

        scenario.agents = self
            .agents
            .into_iter()
            .map(|a| {
                let mut agent = Agent::new(a.id, vec2(a.position), vec2(a.destination));
                if let Some(v) = a.velocity {
                    agent.velocity = vec2(v);
                }
                if let Some(v) = a.target_time {
                    agent.target_time = v;
                }
                if let Some(v) = a.radius {
                    agent.radius = v;
                }
                if let Some(v) = a.mass {
                    agent.mass = v;
                }
                if let Some(v) = a.charge {
                    agent.charge = v;
                }
                if let Some(v) = a.v_max {
                    agent.v_max = v;
                }
                if let Some(v) = a.v_min {
                    agent.v_min = v;
                }
                if let Some(v) = a.arrived {
                    agent.arrived = v;
                }
                agent
            })
            .collect();
        let obstacle = |o: ObstacleFile| {
            let mut ob = Obstacle::new(o.vertices.into_iter().map(vec2).collect());
            if let Some(c) = o.charge {
                ob.charge = c;
            }
            ob
        };
        scenario.obstacles = self.obstacles.into_iter().map(obstacle).collect();
        scenario.walls = self.walls.into_iter().map(obstacle).collect();
        Ok(scenario)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let c: &CellularParams = &s.params.cellular;
        let m: &MagneticParams = &s.params.magnetic;
        let so: &SocialParams = &s.params.social;
        let obstacle = |o: &Obstacle| ObstacleFile {
            vertices: o.vertices.iter().copied().map(point).collect(),
            charge: Some(o.charge),
        };
        ScenarioFile {
            model: s.model.into(),
            dt: Some(s.dt),
            max_time: s.max_time,
            seed: Some(s.seed),
            arrival_tolerance: Some(s.arrival_tolerance),
            bounds: BoundsFile {
                min: point(s.bounds.min),
                max: point(s.bounds.max),
            },
            cellular: Some(CellularFile {
                k: Some(c.k),
                alpha: Some(c.alpha),
                beta: Some(c.beta),
                field_radius: Some(c.field_radius),
                cell_size: Some(c.cell_size),
                tick: Some(c.tick),
            }),
            magnetic: Some(MagneticFile {
                k_coulomb: Some(m.k_coulomb),
                goal_charge: Some(m.goal_charge),
                beta_max_deg: Some(m.beta_max.to_degrees()),
                r_min: Some(m.r_min),
                avoidance_radius: Some(m.avoidance_radius),
            }),
            social: Some(SocialFile {
                tau: Some(so.tau),
                a: Some(so.a),
                b: Some(so.b),
                sigma_xi: Some(so.sigma_xi),
                wall_a: Some(so.wall_a),
                wall_b: Some(so.wall_b),
            }),
            regions: s
                .regions
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            agents: s
                .agents
                .iter()
                .map(|a| AgentFile {
                    id: a.id,
                    position: point(a.position),
                    destination: point(a.destination),
                    velocity: Some(point(a.velocity)),
                    target_time: Some(a.target_time),
                    radius: Some(a.radius),
                    mass: Some(a.mass),
                    charge: Some(a.charge),
                    v_max: Some(a.v_max),
                    v_min: Some(a.v_min),
                    arrived: Some(a.arrived),
                })
                .collect(),
            obstacles: s.obstacles.iter().map(obstacle).collect(),
            walls: s.walls.iter().map(obstacle).collect(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn syntax(text: &str, e: toml::de::Error) -> ParseError {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    ParseError::Syntax {
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

/// First line whose key is the last segment of `path`.
fn find_key_line(text: &str, path: &str) -> Option<usize> {
    let key = path.rsplit('.').next()?;
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn deserialize_strict<T: serde::de::DeserializeOwned>(
    text: &str,
    options: ParseOptions,
) -> std::result::Result<T, ParseError> {
    let mut unknown = Vec::new();
    let value: T = serde_ignored::deserialize(toml::Deserializer::new(text), |path| {
        // Optional tables show up as `?` segments; they carry no location.
        let dotted: Vec<String> = path
            .to_string()
            .split('.')
            .filter(|s| *s != "?")
            .map(str::to_string)
            .collect();
        unknown.push(dotted.join("."))
    })
    .map_err(|e| syntax(text, e))?;
    if options.strict {
        if let Some(path) = unknown.into_iter().next() {
            let line = find_key_line(text, &path);
            return Err(ParseError::UnknownKey { path, line });
        }
    }
    Ok(value)
}

/// Parses and validates a scenario document.
pub fn parse_scenario_with(
    bytes: &[u8],
    options: ParseOptions,
) -> std::result::Result<Scenario, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let (line, column) = line_col(&String::from_utf8_lossy(bytes), e.valid_up_to());
        ParseError::Syntax {
            line,
            column,
            message: "input is not valid UTF-8".into(),
        }
    })?;
    let file: ScenarioFile = deserialize_strict(text, options)?;
    let scenario = file.into_scenario()?;
    scenario.validate()?;
    Ok(scenario)
}

/// Strict [`parse_scenario_with`].
pub fn parse_scenario(bytes: &[u8]) -> std::result::Result<Scenario, ParseError> {
    parse_scenario_with(bytes, ParseOptions::default())
}

/// Canonical scenario document with every field spelled out.
pub fn write_scenario(scenario: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from_scenario(scenario))
        .expect("scenario documents always serialize")
}

/// `%.9g`-style rendering: 9 significant digits, trailing zeros dropped,
/// exponent form outside `1e-4 <= |v| < 1e9`. Negative zero prints as `0`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Canonical trajectory text. Records must be sorted by `(time, agent_id)`
/// with no repeats, and every value finite.
pub fn write_trajectory(records: &[TrajectoryRecord]) -> Result<String> {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (k, r) in records.iter().enumerate() {
        if k > 0 {
            let p = &records[k - 1];
            if (p.time, p.agent_id) >= (r.time, r.agent_id) {
                return Err(Error::Trajectory(format!(
                    "record {k} (t = {}, agent {}) is out of (time, agent_id) order",
                    r.time, r.agent_id
                )));
            }
        }
        let vals = [
            r.time,
            r.position.x,
            r.position.y,
            r.velocity.x,
            r.velocity.y,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Trajectory(format!(
                "record {k} has a non-finite value"
            )));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig9(r.time),
            r.agent_id,
            format_sig9(r.position.x),
            format_sig9(r.position.y),
            format_sig9(r.velocity.x),
            format_sig9(r.velocity.y)
        );
    }
    Ok(out)
}

/// Reads a trajectory table, enforcing the exact header and row order.
pub fn parse_trajectory(text: &str) -> std::result::Result<Vec<TrajectoryRecord>, ParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRAJECTORY_HEADER => {}
        Some((_, h)) => {
            return Err(ParseError::Record {
                line: 1,
                message: format!("expected header `{TRAJECTORY_HEADER}`, found `{h}`"),
            })
        }
        None => {
            return Err(ParseError::Record {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut out: Vec<TrajectoryRecord> = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let err = |message: String| ParseError::Record { line: n, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let real = |k: usize, name: &str| -> std::result::Result<f64, ParseError> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    err(format!(
                        "field `{name}`: `{}` is not a finite number",
                        fields[k]
                    ))
                })
        };
        let id = fields[1].parse::<u32>().map_err(|_| {
            err(format!(
                "field `agent_id`: `{}` is not an agent id",
                fields[1]
            ))
        })?;
        let r = TrajectoryRecord::new(
            real(0, "time")?,
            id,
            Vec2::new(real(2, "x")?, real(3, "y")?),
            Vec2::new(real(4, "vx")?, real(5, "vy")?),
        );
        if let Some(p) = out.last() {
            if (p.time, p.agent_id) >= (r.time, r.agent_id) {
                return Err(err("rows must be sorted by (time, agent_id)".into()));
            }
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    axis: Vec<AxisFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisFile {
    name: String,
    values: Vec<f64>,
}

/// Reads a calibration grid:
///
/// ```toml
/// [[axis]]
/// name = "tau"
/// values = [0.3, 0.5, 0.7]
/// ```
pub fn parse_param_grid(text: &str) -> std::result::Result<ParamGrid, ParseError> {
    let file: GridFile = toml::from_str(text).map_err(|e| syntax(text, e))?;
    Ok(ParamGrid {
        axes: file.axis.into_iter().map(|a| (a.name, a.values)).collect(),
    })
}

fn format_real(v: f64) -> String {
    if v.is_finite() {
        format_sig9(v)
    } else {
        "inf".into()
    }
}

/// One row per grid point: parameter values then both error columns.
pub fn write_fit_table(report: &FitReport) -> String {
    let mut out = String::new();
    let names: Vec<&str> = report
        .error_table
        .first()
        .map(|r| r.point.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let mut header = names.join(",");
    if !header.is_empty() {
        header.push(',');
    }
    header.push_str("position_rmse,velocity_rmse");
    out.push_str(&header);
    out.push('\n');
    for row in &report.error_table {
        for (_, v) in &row.point {
            out.push_str(&format_sig9(*v));
            out.push(',');
        }
        let _ = writeln!(
            out,
            "{},{}",
            format_real(row.position_rmse),
            format_real(row.velocity_rmse)
        );
    }
    out
}

#[derive(Serialize)]
struct FitSummaryFile<'a> {
    reference_id: &'a str,
    best_error: f64,
    best_velocity_error: f64,
    grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_error: Option<f64>,
    holdout_agents: &'a [u32],
    best_params: BTreeMap<&'a str, f64>,
}

/// Machine-readable TOML summary of a calibration run.
pub fn write_fit_summary(report: &FitReport) -> String {
    let summary = FitSummaryFile {
        reference_id: &report.reference_id,
        best_error: report.best_error,
        best_velocity_error: report.best_velocity_error,
        grid_points: report.error_table.len(),
        holdout_error: report.holdout_error,
        holdout_agents: &report.holdout_agents,
        best_params: report
            .best_params
            .iter()
            .map(|(n, v)| (n.as_str(), *v))
            .collect(),
    };
    toml::to_string(&summary).expect("fit summaries always serialize")
}

/// Debug dump of cellular grid state: geometry, then one line per
/// non-empty cell (`blocked` or the occupant's id).
pub fn write_grid_dump(grid: &Grid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cell_size,{}", format_sig9(grid.cell_size));
    let _ = writeln!(
        out,
        "origin,{},{}",
        format_sig9(grid.origin.x),
        format_sig9(grid.origin.y)
    );
    let _ = writeln!(out, "size,{},{}", grid.width, grid.height);
    out.push_str("col,row,state\n");
    for c in grid.cells() {
        if grid.is_blocked(c) {
            let _ = writeln!(out, "{},{},blocked", c.col, c.row);
        } else if let Some(id) = grid.occupant(c) {
            let _ = writeln!(out, "{},{},{}", c.col, c.row, id);
        }
    }
    out
}
