//! Flow, density, queue and evacuation measurements.
//!
//! Everything here is a pure function of a trajectory, so results can be
//! recomputed offline from an exported file. Positions and velocities
//! between records are interpolated linearly. An agent counts as present at
//! time `t` only while its records span `t`; arrived agents stop recording
//! and therefore drop out.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::geometry::{cross, Rect, Vec2};
use crate::scene::AgentId;

/// Default threshold for [`queue_metric`]: below 20% of top speed counts as stalled.
pub const DEFAULT_SPEED_FRACTION: f64 = 0.2;

/// Where to measure: an area (half-open box) or a gate (line segment).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureRegion {
    Area(Rect),
    Gate { a: Vec2, b: Vec2 },
}

impl MeasureRegion {
    pub fn area(min: Vec2, max: Vec2) -> Result<Self> {
        let r = MeasureRegion::Area(Rect::new(min, max));
        r.validate()?;
        Ok(r)
    }

    pub fn gate(a: Vec2, b: Vec2) -> Result<Self> {
        let r = MeasureRegion::Gate { a, b };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureRegion::Area(r) => {
                if !(r.min.is_finite() && r.max.is_finite() && r.width() > 0.0 && r.height() > 0.0)
                {
                    return Err(Error::InvalidRegion(format!(
                        "area {self} has no positive extent"
                    )));
                }
            }
            MeasureRegion::Gate { a, b } => {
                if !(a.is_finite() && b.is_finite()) || a == b {
                    return Err(Error::InvalidRegion(format!(
                        "gate {self} needs two distinct endpoints"
                    )));
                }
            }
        }
        Ok(())
    }

    fn as_area(&self) -> Result<Rect> {
        match self {
            MeasureRegion::Area(r) => Ok(*r),
            MeasureRegion::Gate { .. } => Err(Error::InvalidRegion(format!(
                "{self} is a gate, expected an area"
            ))),
        }
    }

    fn as_gate(&self) -> Result<(Vec2, Vec2)> {
        match self {
            MeasureRegion::Gate { a, b } => Ok((*a, *b)),
            MeasureRegion::Area(_) => Err(Error::InvalidRegion(format!(
                "{self} is an area, expected a gate"
            ))),
        }
    }
}

/// `area:x0,y0,x1,y1` or `gate:x0,y0,x1,y1`.
impl FromStr for MeasureRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidRegion(format!(
                "`{s}`: expected area:x0,y0,x1,y1 or gate:x0,y0,x1,y1"
            ))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        if nums.len() != 4 {
            return Err(bad());
        }
        let p = Vec2::new(nums[0], nums[1]);
        let q = Vec2::new(nums[2], nums[3]);
        match kind.trim() {
            "area" => MeasureRegion::area(p, q),
            "gate" => MeasureRegion::gate(p, q),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for MeasureRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, p, q) = match self {
            MeasureRegion::Area(r) => ("area", r.min, r.max),
            MeasureRegion::Gate { a, b } => ("gate", *a, *b),
        };
        write!(f, "{kind}:{},{},{},{}", p.x, p.y, q.x, q.y)
    }
}

/// Per-agent records in time order.
pub fn tracks(trajectory: &[TrajectoryRecord]) -> BTreeMap<AgentId, Vec<TrajectoryRecord>> {
    let mut map: BTreeMap<AgentId, Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in trajectory {
        map.entry(r.agent_id).or_default().push(*r);
    }
    for track in map.values_mut() {
        track.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    map
}

/// Position and velocity at `t`, or `None` when the track does not span `t`.
pub fn sample(track: &[TrajectoryRecord], t: f64) -> Option<(Vec2, Vec2)> {
    let first = track.first()?;
    let last = track.last()?;
    if t < first.time || t > last.time {
        return None;
    }
    let k = track.partition_point(|r| r.time <= t);
    if k == track.len() {
        return Some((last.position, last.velocity));
    }
    let (r0, r1) = (&track[k - 1], &track[k]);
    if r0.time == t {
        return Some((r0.position, r0.velocity));
    }
    let w = (t - r0.time) / (r1.time - r0.time);
    Some((
        r0.position.lerp(r1.position, w),
        r0.velocity.lerp(r1.velocity, w),
    ))
}

/// Earliest time and latest time in the trajectory.
pub fn span(trajectory: &[TrajectoryRecord]) -> Option<(f64, f64)> {
    let mut it = trajectory.iter().map(|r| r.time);
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
}

/// Distinct record times in ascending order.
pub fn sample_times(trajectory: &[TrajectoryRecord]) -> Vec<f64> {
    let mut ts: Vec<f64> = trajectory.iter().map(|r| r.time).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Earliest time after which no recorded position lies inside the area.
///
/// Each agent that was ever inside leaves at its first record after its last
/// record inside; `None` when some agent's final record is still inside.
pub fn evacuation_time(
    trajectory: &[TrajectoryRecord],
    region: &MeasureRegion,
) -> Result<Option<f64>> {
    let area = region.as_area()?;
    let mut latest = 0.0f64;
    for track in tracks(trajectory).values() {
        let Some(last_inside) = track.iter().rposition(|r| area.contains(r.position)) else {
            continue;
        };
        match track.get(last_inside + 1) {
            Some(next) => latest = latest.max(next.time),
            None => return Ok(None),
        }
    }
    Ok(Some(latest))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFlow {
    /// Crossings to the left of `a → b` minus crossings to the right.
    pub net: i64,
    pub gross: u64,
    pub window: f64,
}

impl GateFlow {
    /// Net crossings per second.
    pub fn flow(&self) -> f64 {
        self.net as f64 / self.window
    }

    pub fn gross_flow(&self) -> f64 {
        self.gross as f64 / self.window
    }
}

/// One gate crossing found between two consecutive records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub agent_id: AgentId,
    pub time: f64,
    /// +1 when moving to the left side of `a → b`, -1 to the right.
    pub direction: i8,
}

/// Every crossing of the gate segment, in track order.
pub fn gate_crossings(
    trajectory: &[TrajectoryRecord],
    gate: &MeasureRegion,
) -> Result<Vec<Crossing>> {
    let (a, b) = gate.as_gate()?;
    let dir = b - a;
    let len2 = dir.length_squared();
    let mut out = Vec::new();
    for (id, track) in tracks(trajectory) {
        for w in track.windows(2) {
            let (r0, r1) = (&w[0], &w[1]);
            let s0 = cross(dir, r0.position - a);
            let s1 = cross(dir, r1.position - a);
            let left0 = s0 >= 0.0;
            if left0 == (s1 >= 0.0) {
                continue;
            }
            let frac = s0 / (s0 - s1);
            let hit = r0.position.lerp(r1.position, frac);
            let u = (hit - a).dot(dir) / len2;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            out.push(Crossing {
                agent_id: id,
                time: r0.time + (r1.time - r0.time) * frac,
                direction: if left0 { -1 } else { 1 },
            });
        }
    }
    Ok(out)
}

/// Crossings with interpolated time in `[start, start + window)`, per second.
pub fn gate_flow_between(
    trajectory: &[TrajectoryRecord],
    gate: &MeasureRegion,
    start: f64,
    window: f64,
) -> Result<GateFlow> {
    if window <= 0.0 || !window.is_finite() {
        return Err(Error::invalid(
            "window",
            format!("must be > 0, got {window}"),
        ));
    }
    let mut net = 0i64;
    let mut gross = 0u64;
    for c in gate_crossings(trajectory, gate)? {
        if c.time >= start && c.time < start + window {
            net += i64::from(c.direction);
            gross += 1;
        }
    }
    Ok(GateFlow { net, gross, window })
}

/// Flow through the gate over `window` seconds from the first record.
pub fn gate_flow(
    trajectory: &[TrajectoryRecord],
    gate: &MeasureRegion,
    window: f64,
) -> Result<GateFlow> {
    let start = span(trajectory).map_or(0.0, |(lo, _)| lo);
    gate_flow_between(trajectory, gate, start, window)
}

/// Agents inside the area at time `t` per square meter.
pub fn density(trajectory: &[TrajectoryRecord], region: &MeasureRegion, t: f64) -> Result<f64> {
    let area = region.as_area()?;
    let (start, end) = span(trajectory).unwrap_or((0.0, 0.0));
    if !(t >= start && t <= end) {
        return Err(Error::OutOfSpan {
            time: t,
            start,
            end,
        });
    }
    let count = tracks(trajectory)
        .values()
        .filter_map(|track| sample(track, t))
        .filter(|(p, _)| area.contains(*p))
        .count();
    Ok(count as f64 / area.area())
}

/// Number of agents still walking at `t` whose speed is below
/// `speed_fraction × v_max`.
pub fn queue_metric(
    trajectory: &[TrajectoryRecord],
    t: f64,
    speed_fraction: f64,
    v_max: impl Fn(AgentId) -> f64,
) -> Result<usize> {
    if !(speed_fraction > 0.0 && speed_fraction < 1.0) {
        return Err(Error::invalid(
            "speed_fraction",
            format!("must lie in (0, 1), got {speed_fraction}"),
        ));
    }
    Ok(tracks(trajectory)
        .iter()
        .filter_map(|(id, track)| sample(track, t).map(|(_, v)| (*id, v)))
        .filter(|(id, v)| v.length() < speed_fraction * v_max(*id))
        .count())
}

/// Queue and densities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSample {
    pub time: f64,
    pub queued: usize,
    pub upstream_density: f64,
    pub downstream_density: f64,
}

/// Queue length with upstream/downstream densities at every record time up
/// to and including `until`.
pub fn queue_profile(
    trajectory: &[TrajectoryRecord],
    upstream: &MeasureRegion,
    downstream: &MeasureRegion,
    until: f64,
    speed_fraction: f64,
    v_max: impl Fn(AgentId) -> f64,
) -> Result<Vec<QueueSample>> {
    sample_times(trajectory)
        .into_iter()
        .take_while(|&t| t <= until)
        .map(|t| {
            Ok(QueueSample {
                time: t,
                queued: queue_metric(trajectory, t, speed_fraction, &v_max)?,
                upstream_density: density(trajectory, upstream, t)?,
                downstream_density: density(trajectory, downstream, t)?,
            })
        })
        .collect()
}
