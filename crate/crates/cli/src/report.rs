//! Metric tables printed by `compare` and `metrics`.

use std::fmt::Write as _;

use clap::Args;

use pedsim::io::format_sig9;
use pedsim::metrics::{
    density, evacuation_time, gate_flow, queue_metric, sample_times, span, MeasureRegion,
};
use pedsim::{AgentId, Result, RunOutput, Scenario, TrajectoryRecord};

/// Where `compare` takes its readings. Each value is a region name from the
/// scenario or a literal `area:`/`gate:` spec; missing regions print `-`.
#[derive(Args, Debug, Clone)]
pub struct RegionArgs {
    /// Area in front of the bottleneck.
    #[arg(long, default_value = "upstream")]
    pub upstream: String,
    /// Area behind the bottleneck.
    #[arg(long, default_value = "downstream")]
    pub downstream: String,
    /// Area that must empty for the evacuation time.
    #[arg(long, default_value = "evacuation")]
    pub evacuation: String,
    /// Queue readings start here, after the crowd has left rest (s).
    #[arg(long, default_value_t = 2.0)]
    pub warmup: f64,
    #[arg(long, default_value_t = pedsim::metrics::DEFAULT_SPEED_FRACTION)]
    pub speed_fraction: f64,
}

fn lookup(s: &Scenario, arg: &str) -> Result<Option<MeasureRegion>> {
    if arg.contains(':') {
        return arg.parse().map(Some);
    }
    Ok(s.region(arg).copied())
}

pub struct CompareRow {
    model: &'static str,
    discrete: bool,
    agents: usize,
    arrived: usize,
    mean_arrival: Option<f64>,
    evacuation: Option<f64>,
    peak_queue: Option<(f64, usize)>,
    upstream: Option<f64>,
    downstream: Option<f64>,
}

pub fn compare_row(s: &Scenario, run: &RunOutput, regions: &RegionArgs) -> Result<CompareRow> {
    let traj = &run.trajectory;
    let arrivals: Vec<f64> = run
        .summary
        .arrival_times
        .values()
        .flatten()
        .copied()
        .collect();
    let mean_arrival =
        (!arrivals.is_empty()).then(|| arrivals.iter().sum::<f64>() / arrivals.len() as f64);

    let evacuation = match lookup(s, &regions.evacuation)? {
        Some(r) => evacuation_time(traj, &r)?,
        None => None,
    };

    let v_max = |id: AgentId| {
        s.agents
            .iter()
            .find(|a| a.id == id)
            .map_or(f64::INFINITY, |a| a.v_max)
    };
    let mut peak: Option<(f64, usize)> = None;
    for t in sample_times(traj)
        .into_iter()
        .filter(|&t| t >= regions.warmup)
    {
        let q = queue_metric(traj, t, regions.speed_fraction, v_max)?;
        if peak.is_none_or(|(_, best)| q > best) {
            peak = Some((t, q));
        }
    }
    let at_peak = |arg: &str| -> Result<Option<f64>> {
        match (lookup(s, arg)?, peak) {
            (Some(r), Some((t, _))) => density(traj, &r, t).map(Some),
            _ => Ok(None),
        }
    };

    Ok(CompareRow {
        model: s.model.name(),
        discrete: s.model.is_discrete(),
        agents: s.agents.len(),
        arrived: run.summary.arrived(),
        mean_arrival,
        evacuation,
        peak_queue: peak,
        upstream: at_peak(&regions.upstream)?,
        downstream: at_peak(&regions.downstream)?,
    })
}

/// Quotes a field that would otherwise split the row.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), format_sig9)
}

/// Side-by-side table, one row per model. Densities are read at the time of
/// the peak queue.
pub fn comparison_table(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "model,space,agents,arrived,mean_arrival_s,evacuation_s,peak_queue,peak_queue_time_s,upstream_density,downstream_density\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.model,
            if r.discrete { "discrete" } else { "continuous" },
            r.agents,
            r.arrived,
            opt(r.mean_arrival),
            opt(r.evacuation),
            r.peak_queue
                .map_or_else(|| "-".into(), |(_, q)| q.to_string()),
            opt(r.peak_queue.map(|(t, _)| t)),
            opt(r.upstream),
            opt(r.downstream),
        );
    }
    out
}

/// `region,metric,value` rows for every region and every requested instant.
pub fn metrics_table(
    traj: &[TrajectoryRecord],
    regions: &[(String, MeasureRegion)],
    at: &[f64],
    window: Option<f64>,
    speed_fraction: f64,
    v_max: impl Fn(AgentId) -> f64,
) -> Result<String> {
    let mut out = String::from("region,metric,value\n");
    for (label, region) in regions {
        let name = csv_field(label);
        match region {
            MeasureRegion::Area(_) => {
                let evac = evacuation_time(traj, region)?;
                let _ = writeln!(
                    out,
                    "{name},evacuation_time_s,{}",
                    evac.map_or_else(|| "none".into(), format_sig9)
                );
                for &t in at {
                    let _ = writeln!(
                        out,
                        "{name},density@{},{}",
                        format_sig9(t),
                        format_sig9(density(traj, region, t)?)
                    );
                }
            }
            MeasureRegion::Gate { .. } => {
                let w = window.unwrap_or_else(|| span(traj).map_or(0.0, |(lo, hi)| hi - lo));
                let flow = gate_flow(traj, region, w)?;
                let _ = writeln!(out, "{name},window_s,{}", format_sig9(w));
                let _ = writeln!(out, "{name},net_crossings,{}", flow.net);
                let _ = writeln!(out, "{name},gross_crossings,{}", flow.gross);
                let _ = writeln!(out, "{name},flow_per_s,{}", format_sig9(flow.flow()));
                let _ = writeln!(
                    out,
                    "{name},gross_flow_per_s,{}",
                    format_sig9(flow.gross_flow())
                );
            }
        }
    }
    for &t in at {
        let q = queue_metric(traj, t, speed_fraction, &v_max)?;
        let _ = writeln!(out, "-,queue@{},{q}", format_sig9(t));
    }
    Ok(out)
}
