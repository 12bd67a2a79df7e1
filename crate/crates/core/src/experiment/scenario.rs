//! Runs a single configured scenario and writes its artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{OutputKind, ScenarioConfig};
use super::svg::{emit_svg, PlotData, Series};
use super::{write_file, ExperimentError};
use crate::integrator::{simulate, SimConfig, Trajectory2D};
use crate::model::{equilibria, nullcline_markers, EquilibriumSet, RegimeReport, State};
use crate::orbit::{find_order1, find_order2, OrbitOptions, PeriodicOrbit, StabilityReport};

/// Findings of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub equilibria: EquilibriumSet,
    pub regime: Option<RegimeReport>,
    pub event_count: usize,
    pub t_end: f64,
    pub final_state: State,
    /// Uncontrolled runs: scaled distance to the endemic point over the second half of the run.
    pub tail_distance: Option<(f64, f64)>,
    /// Uncontrolled runs: the distance never grows over the second half.
    pub tail_monotone: Option<bool>,
    pub orbit: Option<PeriodicOrbit>,
    pub stability: Option<StabilityReport>,
    /// Order-2 anchors when an order-2 search was requested and found one.
    pub order2: Option<Vec<f64>>,
    /// Reason the orbit search was skipped or failed.
    pub orbit_note: Option<String>,
    pub written: Vec<PathBuf>,
}

impl ScenarioSummary {
    /// Flat `key=value` report.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let disease_free = self.equilibria.disease_free;
        writeln!(out, "disease_free={},{}", disease_free.m, disease_free.i_b).unwrap();
        writeln!(out, "endemic_exists={}", self.equilibria.endemic_exists()).unwrap();
        if let Some(e) = self.equilibria.endemic {
            writeln!(out, "endemic={},{}", e.m, e.i_b).unwrap();
        }
        if let Some(regime) = &self.regime {
            for (k, v) in regime.to_key_values() {
                writeln!(out, "{k}={v}").unwrap();
            }
        }
        writeln!(out, "event_count={}", self.event_count).unwrap();
        writeln!(out, "t_end={}", self.t_end).unwrap();
        writeln!(
            out,
            "final_state={},{}",
            self.final_state.m, self.final_state.i_b
        )
        .unwrap();
        if let Some((start, end)) = self.tail_distance {
            writeln!(out, "tail_distance_start={start}").unwrap();
            writeln!(out, "tail_distance_end={end}").unwrap();
        }
        if let Some(mono) = self.tail_monotone {
            writeln!(out, "tail_monotone={mono}").unwrap();
        }
        if let Some(orbit) = &self.orbit {
            out.push_str(&orbit_report(orbit));
        }
        if let Some(stability) = &self.stability {
            for (k, v) in stability.to_key_values() {
                writeln!(out, "{k}={v}").unwrap();
            }
        }
        if let Some(anchors) = &self.order2 {
            writeln!(out, "order2_anchors={}", join(anchors)).unwrap();
        }
        if let Some(note) = &self.orbit_note {
            writeln!(out, "orbit_note={note}").unwrap();
        }
        out
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `key=value` lines describing a periodic orbit.
pub fn orbit_report(orbit: &PeriodicOrbit) -> String {
    format!(
        "order={}\nanchors={}\npre_impulse_M={}\nperiod={}\n",
        orbit.order,
        join(&orbit.anchors),
        join(&orbit.pre_impulse_m()),
        orbit.period
    )
}

/// The orbit laid out as a trajectory so it can be written in the trajectory CSV schema.
pub fn orbit_trajectory(orbit: &PeriodicOrbit, sim: &ScenarioConfig) -> Trajectory2D {
    use crate::integrator::{ImpulseEvent, SimulationEnd};
    let policy = sim
        .policy
        .expect("orbits exist only under a control policy");
    let events = orbit
        .flights
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let pre = f.end_state();
            ImpulseEvent {
                t: f.t_end,
                pre,
                post: State::new((1.0 - policy.p) * pre.m, policy.phase_level()),
                index,
                grazing: false,
            }
        })
        .collect();
    Trajectory2D {
        segments: orbit.flights.clone(),
        events,
        initial: orbit.flights[0].start_state(),
        params: sim.params,
        policy: sim.policy,
        end: SimulationEnd::MaxImpulses,
    }
}

/// Per-run numerical settings that are not part of the scenario file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub orbit: OrbitOptions,
    pub max_impulses: usize,
    /// Also scan for order-2 orbits.
    pub search_order2: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            orbit: OrbitOptions::default(),
            max_impulses: SimConfig::default().max_impulses,
            search_order2: false,
        }
    }
}

/// Scaled distances below this are solver noise and do not count against monotonicity.
const TAIL_NOISE_FLOOR: f64 = 1e-8;

fn tail_approach(traj: &Trajectory2D, target: State) -> (f64, f64, bool) {
    let params = traj.params;
    let dist = |s: &State| ((s.m - target.m) / params.k_m).hypot((s.i_b - target.i_b) / params.n_b);
    let t_half = 0.5 * traj.t_end();
    let tail: Vec<f64> = traj
        .samples()
        .filter(|(t, _)| *t >= t_half)
        .map(|(_, s)| dist(s))
        .collect();
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + TAIL_NOISE_FLOOR);
    (tail[0], tail[tail.len() - 1], monotone)
}

/// Runs the simulation (and the order-1 search when it applies) and writes the requested outputs.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    settings: &RunSettings,
) -> Result<ScenarioSummary, ExperimentError> {
    cfg.validate()?;
    let params = &cfg.params;
    let sim = SimConfig {
        t_max: cfg.t_max,
        max_impulses: settings.max_impulses,
        ..settings.orbit.sim
    };
    let traj = simulate(cfg.initial, params, cfg.policy.as_ref(), &sim)?;
    let eq = equilibria(params);
    let regime = cfg
        .policy
        .as_ref()
        .map(|p| nullcline_markers(params, p))
        .transpose()?;

    let mut summary = ScenarioSummary {
        equilibria: eq,
        regime,
        event_count: traj.events.len(),
        t_end: traj.t_end(),
        final_state: traj.final_state(),
        tail_distance: None,
        tail_monotone: None,
        orbit: None,
        stability: None,
        order2: None,
        orbit_note: None,
        written: Vec::new(),
    };

    match (&cfg.policy, eq.endemic) {
        (None, Some(e)) => {
            let (start, end, mono) = tail_approach(&traj, e);
            summary.tail_distance = Some((start, end));
            summary.tail_monotone = Some(mono);
        }
        (Some(policy), Some(_)) if regime.is_some_and(|r| r.threshold_reachable) => {
            match find_order1(params, policy, &settings.orbit) {
                Ok((orbit, report)) => {
                    summary.orbit = Some(orbit);
                    summary.stability = Some(report);
                }
                Err(e) => summary.orbit_note = Some(e.to_string()),
            }
            if settings.search_order2 {
                match find_order2(params, policy, &settings.orbit) {
                    Ok(found) => summary.order2 = found.map(|o| o.anchors),
                    Err(e) => summary.orbit_note = Some(e.to_string()),
                }
            }
        }
        (Some(_), Some(_)) => {
            summary.orbit_note = Some("H_b >= I_b*: the guard is never reached".into())
        }
        (_, None) => summary.orbit_note = Some("no endemic equilibrium".into()),
    }

    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for kind in &cfg.outputs {
        let path = match kind {
            OutputKind::TrajectoryCsv => {
                let path = out_dir.join("trajectory.csv");
                write_file(&path, &traj.to_csv(cfg.resample_dt))?;
                if let Some(orbit) = &summary.orbit {
                    let orbit_path = out_dir.join("orbit.csv");
                    write_file(
                        &orbit_path,
                        &orbit_trajectory(orbit, cfg).to_csv(cfg.resample_dt),
                    )?;
                    summary.written.push(orbit_path);
                }
                path
            }
            OutputKind::PhaseSvg => {
                let path = out_dir.join("phase.svg");
                emit_svg(&phase_data(&traj), &path)?;
                path
            }
            OutputKind::TimeseriesSvg => {
                let path = out_dir.join("timeseries.svg");
                emit_svg(
                    &PlotData::Timeseries {
                        series: vec![timeseries(&traj, "")],
                    },
                    &path,
                )?;
                path
            }
            OutputKind::Report => continue,
        };
        summary.written.push(path);
    }
    if cfg.outputs.contains(&OutputKind::Report) {
        let path = out_dir.join("report.txt");
        summary.written.push(path.clone());
        let mut text = cfg.to_config_string();
        text.push_str(&summary.to_report());
        write_file(&path, &text)?;
    }
    Ok(summary)
}

/// Flights of a trajectory as phase-plane polylines.
pub fn phase_data(traj: &Trajectory2D) -> PlotData {
    PlotData::Phase {
        flights: traj
            .segments
            .iter()
            .map(|s| s.samples.iter().map(|(_, st)| *st).collect())
            .collect(),
        params: traj.params,
        policy: traj.policy,
    }
}

/// Mesh samples with both sides of every jump.
pub fn timeseries(traj: &Trajectory2D, label: &str) -> Series {
    Series {
        label: label.to_string(),
        points: traj.samples().copied().collect(),
    }
}
