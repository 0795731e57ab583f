//! `pedsim` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage and validation errors, 2 when a
//! simulation aborts or an output cannot be written.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use pedsim::calibrate::{calibrate_with, CalibrationOptions};
use pedsim::engine::SimulationState;
use pedsim::io::{
    parse_param_grid, parse_scenario_with, parse_trajectory, write_fit_summary, write_fit_table,
    write_grid_dump, write_trajectory, ParseOptions,
};
use pedsim::metrics::MeasureRegion;
use pedsim::{ModelKind, Runner, Scenario, TrajectoryRecord};

#[derive(Parser)]
#[command(name = "pedsim", version, about = "Microscopic pedestrian simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario model: cellular, magnetic or social.
        #[arg(long)]
        model: Option<ModelKind>,
        /// Accept keys the scenario format does not define.
        #[arg(long)]
        allow_unknown: bool,
        /// Also write the cellular grid at t = 0.
        #[arg(long)]
        grid_dump: Option<PathBuf>,
        /// Report progress on stderr every N steps.
        #[arg(long, value_name = "N")]
        progress: Option<u64>,
    },
    /// Run all three models on one scene and tabulate the results side by side.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        allow_unknown: bool,
        #[command(flatten)]
        regions: report::RegionArgs,
    },
    /// Measure flow, density, queue and evacuation on a trajectory file.
    Metrics {
        #[arg(long)]
        trajectory: PathBuf,
        /// `area:x0,y0,x1,y1`, `gate:x0,y0,x1,y1`, or a region name from --scenario.
        #[arg(long = "region", required = true)]
        regions: Vec<String>,
        /// Scenario supplying named regions and per-agent top speeds.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Instants for density and queue readings (s).
        #[arg(long = "at")]
        at: Vec<f64>,
        /// Gate counting window (s); defaults to the trajectory span.
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, default_value_t = pedsim::metrics::DEFAULT_SPEED_FRACTION)]
        speed_fraction: f64,
        /// Top speed assumed when no scenario is given (m/s).
        #[arg(long, default_value_t = pedsim::Agent::DEFAULT_V_MAX)]
        v_max: f64,
    },
    /// Fit model constants to a reference trajectory by grid search.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Error table, one row per grid point.
        #[arg(long)]
        out: PathBuf,
        /// Summary file; defaults to the table path with a `.toml` extension.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Hold out this fraction of reference agents (highest ids) for validation.
        #[arg(long)]
        holdout_fraction: Option<f64>,
        #[arg(long)]
        allow_unknown: bool,
    },
}

/// A failure and the exit status it maps to.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

/// Aborted runs are runtime failures; everything else the library rejects
/// is bad input.
fn sim_error(e: pedsim::Error) -> Failure {
    match e {
        pedsim::Error::NonFinite { .. } | pedsim::Error::Finished(_) => Failure::Runtime(e.into()),
        other => Failure::Usage(other.into()),
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::Runtime)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Runtime)
}

fn load_scenario(path: &Path, allow_unknown: bool) -> CliResult<Scenario> {
    let bytes = read(path)?;
    parse_scenario_with(
        &bytes,
        ParseOptions {
            strict: !allow_unknown,
        },
    )
    .map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

fn load_trajectory(path: &Path) -> CliResult<Vec<TrajectoryRecord>> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| usage(anyhow!("{}: not UTF-8 text", path.display())))?;
    parse_trajectory(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

/// A literal region spec, or the name of one of the scenario's regions.
fn resolve_region(arg: &str, scenario: Option<&Scenario>) -> CliResult<MeasureRegion> {
    if arg.contains(':') {
        return arg
            .parse()
            .map_err(|e: pedsim::Error| usage(anyhow!("--region {arg}: {e}")));
    }
    scenario
        .and_then(|s| s.region(arg).copied())
        .ok_or_else(|| {
            usage(anyhow!(
                "--region {arg}: no such region (pass a spec or a --scenario that names it)"
            ))
        })
}

fn simulate(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    model: Option<ModelKind>,
    allow_unknown: bool,
    grid_dump: Option<&Path>,
    progress: Option<u64>,
) -> CliResult {
    let mut s = load_scenario(scenario, allow_unknown)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(model) = model {
        s.model = model;
    }
    if let Some(path) = grid_dump {
        let state = SimulationState::new(&s).map_err(sim_error)?;
        let grid = state.grid.ok_or_else(|| {
            usage(anyhow!(
                "--grid-dump needs the cellular model, scenario uses {}",
                s.model
            ))
        })?;
        write(path, &write_grid_dump(&grid))?;
    }

    let mut runner = Runner::new(&s);
    if let Some(every) = progress {
        runner = runner.progress(every, |st| {
            eprintln!("t = {:.2} s, {} walking", st.time, st.active_count());
        });
    }
    let result = runner.run().map_err(sim_error)?;
    let text = write_trajectory(&result.trajectory).map_err(|e| Failure::Runtime(e.into()))?;
    write(out, &text)?;

    let sm = &result.summary;
    println!(
        "{}: {} of {} arrived, {} steps, t = {} s{}",
        s.model,
        sm.arrived(),
        s.agents.len(),
        sm.steps,
        pedsim::io::format_sig9(sm.final_time),
        if sm.timed_out { " (timed out)" } else { "" }
    );
    Ok(())
}

fn compare(
    scenario: &Path,
    out_dir: &Path,
    allow_unknown: bool,
    regions: &report::RegionArgs,
) -> CliResult {
    let base = load_scenario(scenario, allow_unknown)?;
    let mut rows = Vec::new();
    for model in ModelKind::ALL {
        let mut s = base.clone();
        s.model = model;
        let result = Runner::new(&s).run().map_err(sim_error)?;
        let text = write_trajectory(&result.trajectory).map_err(|e| Failure::Runtime(e.into()))?;
        write(&out_dir.join(format!("{}.csv", model.name())), &text)?;
        rows.push(report::compare_row(&s, &result, regions).map_err(sim_error)?);
    }
    let table = report::comparison_table(&rows);
    write(&out_dir.join("comparison.csv"), &table)?;
    print!("{table}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn metrics(
    trajectory: &Path,
    regions: &[String],
    scenario: Option<&Path>,
    at: &[f64],
    window: Option<f64>,
    speed_fraction: f64,
    v_max: f64,
) -> CliResult {
    let traj = load_trajectory(trajectory)?;
    let scene = scenario.map(|p| load_scenario(p, false)).transpose()?;
    let resolved: Vec<(String, MeasureRegion)> = regions
        .iter()
        .map(|r| Ok((r.clone(), resolve_region(r, scene.as_ref())?)))
        .collect::<CliResult<_>>()?;
    let top_speed = |id: u32| {
        scene
            .as_ref()
            .and_then(|s| s.agents.iter().find(|a| a.id == id))
            .map_or(v_max, |a| a.v_max)
    };
    let table = report::metrics_table(&traj, &resolved, at, window, speed_fraction, top_speed)
        .map_err(sim_error)?;
    print!("{table}");
    Ok(())
}

fn calibrate(
    scenario: &Path,
    reference: &Path,
    grid: &Path,
    out: &Path,
    summary: Option<&Path>,
    holdout_fraction: Option<f64>,
    allow_unknown: bool,
) -> CliResult {
    let s = load_scenario(scenario, allow_unknown)?;
    let reference_records = load_trajectory(reference)?;
    let grid_text = String::from_utf8(read(grid)?)
        .map_err(|_| usage(anyhow!("{}: not UTF-8 text", grid.display())))?;
    let grid_spec =
        parse_param_grid(&grid_text).map_err(|e| usage(anyhow!("{}: {e}", grid.display())))?;
    let options = CalibrationOptions {
        reference_id: reference.display().to_string(),
        holdout_fraction,
        ..CalibrationOptions::default()
    };
    let report = calibrate_with(&s, &grid_spec, &reference_records, &options).map_err(sim_error)?;
    write(out, &write_fit_table(&report))?;
    let summary_path = summary
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("toml"));
    write(&summary_path, &write_fit_summary(&report))?;

    let best: Vec<String> = report
        .best_params
        .iter()
        .map(|(n, v)| format!("{n} = {v}"))
        .collect();
    println!(
        "best: {} (rmse {} m over {} points)",
        best.join(", "),
        pedsim::io::format_sig9(report.best_error),
        report.error_table.len()
    );
    if let Some(h) = report.holdout_error {
        println!("holdout rmse {} m", pedsim::io::format_sig9(h));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            model,
            allow_unknown,
            grid_dump,
            progress,
        } => simulate(
            &scenario,
            &out,
            seed,
            model,
            allow_unknown,
            grid_dump.as_deref(),
            progress,
        ),
        Command::Compare {
            scenario,
            out_dir,
            allow_unknown,
            regions,
        } => compare(&scenario, &out_dir, allow_unknown, &regions),
        Command::Metrics {
            trajectory,
            regions,
            scenario,
            at,
            window,
            speed_fraction,
            v_max,
        } => metrics(
            &trajectory,
            &regions,
            scenario.as_deref(),
            &at,
            window,
            speed_fraction,
            v_max,
        ),
        Command::Calibrate {
            scenario,
            reference,
            grid,
            out,
            summary,
            holdout_fraction,
            allow_unknown,
        } => calibrate(
            &scenario,
            &reference,
            &grid,
            &out,
            summary.as_deref(),
            holdout_fraction,
            allow_unknown,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
