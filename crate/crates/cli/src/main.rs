use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use wnv_core::experiment::scan::seed_from_state;
use wnv_core::experiment::scenario::{orbit_report, orbit_trajectory};
use wnv_core::experiment::{
    bifurcation_scan, emit_svg, parse_config, preset, run_preset, run_scenario, with_workers,
    ConfigError, ExperimentError, OutputKind, RunSettings, ScanSettings, ScenarioConfig, SweepKey,
};
use wnv_core::{
    dulac_divergence, equilibria, find_order1, find_order2, iterate_map, jacobian_eigenvalues,
    nullcline_markers, ControlPolicy, IntegrationError, ModelError, OrbitError, OrbitOptions,
    SimConfig,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NO_HIT: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wnv",
    version,
    about = "West Nile virus host-vector model with threshold-triggered control"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Scenario file of `key=value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV, SVG and report outputs.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Relative integration tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_rel: f64,
    /// Absolute integration tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_abs: f64,
    /// Worker threads for grid scans (defaults to the number of cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Reserved; the dynamics are deterministic and no command draws random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the equilibria, their Jacobian eigenvalues and the Dulac divergence.
    Equilibria,
    /// Print the nullcline markers and regime flags of the control policy.
    Regime,
    /// Simulate the scenario and write its trajectory, plots and report.
    Simulate,
    /// Locate the order-1 periodic orbit (and optionally an order-2 one).
    FindCycle {
        /// Also scan for an order-2 orbit.
        #[arg(long)]
        order2: bool,
        /// Instead of root finding, iterate the return map from the scenario's initial state.
        #[arg(long)]
        iterate: bool,
        #[arg(long, default_value_t = 200)]
        n_transient: usize,
        #[arg(long, default_value_t = 50)]
        n_record: usize,
    },
    /// Locate the order-1 orbit and report its Floquet multiplier.
    Floquet,
    /// Sweep one control parameter and record the tail of the return map per value.
    Scan {
        /// Swept parameter: p, q or H_b.
        #[arg(long)]
        key: SweepKey,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        /// Number of grid values (at least 2).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        n_transient: usize,
        #[arg(long, default_value_t = 50)]
        n_record: usize,
    },
    /// Run a built-in scenario (fig3, fig4, fig5a, fig5b, fig6, fig7a, fig7b, fig8).
    Preset { name: String },
}

impl GlobalOpts {
    fn orbit_options(&self) -> Result<OrbitOptions> {
        for (flag, v) in [("--tol-rel", self.tol_rel), ("--tol-abs", self.tol_abs)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Domain {
                    line: None,
                    key: flag.into(),
                    value: v.to_string(),
                    constraint: "finite and > 0".into(),
                }
                .into());
            }
        }
        Ok(OrbitOptions {
            sim: SimConfig::with_tolerances(self.tol_rel, self.tol_abs),
            ..OrbitOptions::default()
        })
    }

    fn scenario(&self) -> Result<ScenarioConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| anyhow!(ConfigError::MissingKey("--config".into())))?;
        parse_config(path).map_err(|e| match e {
            ExperimentError::Io { path, source } => anyhow!(UnreadableConfig { path, source }),
            other => anyhow!(other),
        })
    }
}

/// The scenario file could not be read; reported as a configuration error.
#[derive(Debug)]
struct UnreadableConfig {
    path: PathBuf,
    source: std::io::Error,
}

impl Display for UnreadableConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot read config {}", self.path.display())
    }
}

impl std::error::Error for UnreadableConfig {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn require_policy(cfg: &ScenarioConfig) -> Result<ControlPolicy> {
    cfg.policy.ok_or_else(|| {
        anyhow!(ConfigError::MissingKey(
            "p, q, H_b (this command needs a control policy)".into()
        ))
    })
}

fn print_pairs<K: Display, V: Display>(pairs: impl IntoIterator<Item = (K, V)>) {
    for (k, v) in pairs {
        println!("{k}={v}");
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let opts = g.orbit_options()?;
    match &cli.command {
        Command::Equilibria => {
            let cfg = g.scenario()?;
            let eq = equilibria(&cfg.params);
            let (a, b) = jacobian_eigenvalues(&cfg.params, eq.disease_free);
            println!("disease_free={},{}", eq.disease_free.m, eq.disease_free.i_b);
            println!("disease_free_eigenvalues={a},{b}");
            println!("endemic_exists={}", eq.endemic_exists());
            if let Some(e) = eq.endemic {
                let (a, b) = jacobian_eigenvalues(&cfg.params, e);
                println!("endemic={},{}", e.m, e.i_b);
                println!("endemic_eigenvalues={a},{b}");
            }
            println!("dulac_divergence={}", dulac_divergence(&cfg.params));
        }
        Command::Regime => {
            let cfg = g.scenario()?;
            let policy = require_policy(&cfg)?;
            print_pairs(nullcline_markers(&cfg.params, &policy)?.to_key_values());
        }
        Command::Simulate => {
            let cfg = g.scenario()?;
            let settings = RunSettings {
                orbit: opts,
                ..RunSettings::default()
            };
            let summary = run_scenario(&cfg, &g.out, &settings)?;
            print!("{}", summary.to_report());
            for path in &summary.written {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::FindCycle {
            order2,
            iterate,
            n_transient,
            n_record,
        } => {
            let cfg = g.scenario()?;
            let policy = require_policy(&cfg)?;
            if *iterate {
                let x0 = seed_from_state(cfg.initial, &cfg.params, &policy, &opts.sim);
                let it = iterate_map(x0, &cfg.params, &policy, *n_transient, *n_record, &opts)?;
                println!("seed={x0}");
                println!("tail_order={}", it.order.as_str());
                println!(
                    "tail={}",
                    it.values
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
                return Ok(());
            }
            let (orbit, _) = find_order1(&cfg.params, &policy, &opts)?;
            print!("{}", orbit_report(&orbit));
            create_dir(&g.out)?;
            let path = g.out.join("orbit.csv");
            std::fs::write(
                &path,
                orbit_trajectory(&orbit, &cfg).to_csv(cfg.resample_dt),
            )
            .with_context(|| format!("writing {}", path.display()))?;
            if cfg.outputs.contains(&OutputKind::PhaseSvg) {
                emit_svg(
                    &wnv_core::experiment::scenario::phase_data(&orbit_trajectory(&orbit, &cfg)),
                    &g.out.join("orbit.svg"),
                )?;
            }
            if *order2 {
                match with_workers(g.workers, || find_order2(&cfg.params, &policy, &opts))? {
                    Some(o2) => print!("order2_{}", orbit_report(&o2)),
                    None => println!("order2=absent"),
                }
            }
        }
        Command::Floquet => {
            let cfg = g.scenario()?;
            let policy = require_policy(&cfg)?;
            let (orbit, report) = find_order1(&cfg.params, &policy, &opts)?;
            print!("{}", orbit_report(&orbit));
            print_pairs(report.to_key_values());
        }
        Command::Scan {
            key,
            lo,
            hi,
            n,
            n_transient,
            n_record,
        } => {
            let cfg = g.scenario()?;
            let settings = ScanSettings {
                n_transient: *n_transient,
                n_record: *n_record,
                orbit: opts,
            };
            let result = with_workers(g.workers, || {
                bifurcation_scan(&cfg, *key, *lo, *hi, *n, &settings)
            })?;
            create_dir(&g.out)?;
            let path = g.out.join("scan.csv");
            std::fs::write(&path, result.to_csv())
                .with_context(|| format!("writing {}", path.display()))?;
            emit_svg(&result.plot_data(), &g.out.join("bifurcation.svg"))?;
            for cell in &result.cells {
                println!(
                    "{}={} status={} order={}",
                    key,
                    cell.value,
                    cell.status.as_str(),
                    cell.order.map(|o| o.as_str()).unwrap_or("-")
                );
            }
        }
        Command::Preset { name } => {
            let preset = preset(name)?;
            let dir = g.out.join(preset.name);
            let settings = RunSettings {
                orbit: opts,
                ..RunSettings::default()
            };
            let scan_settings = ScanSettings {
                orbit: opts,
                ..ScanSettings::default()
            };
            let outcome = with_workers(g.workers, || {
                run_preset(&preset, &dir, &settings, &scan_settings)
            })?;
            println!("preset={}", preset.name);
            println!("description={}", preset.description);
            print!("{}", outcome.base.to_report());
            for (label, summary) in &outcome.variants {
                match &summary.orbit {
                    Some(o) => println!("variant[{label}].period={}", o.period),
                    None => println!("variant[{label}].event_count={}", summary.event_count),
                }
            }
            if let Some(scan) = &outcome.scan {
                let ok = scan
                    .cells
                    .iter()
                    .filter(|c| c.status.as_str() == "ok")
                    .count();
                println!("scan_cells={} scan_ok={ok}", scan.cells.len());
            }
            eprintln!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn orbit_exit_code(e: &OrbitError) -> u8 {
    match e {
        OrbitError::NoHit { .. } | OrbitError::Unreachable { .. } | OrbitError::NoEndemic => {
            EXIT_NO_HIT
        }
        OrbitError::Model(_) | OrbitError::Integration(IntegrationError::Model(_)) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<ModelError>() || cause.is::<UnreadableConfig>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<OrbitError>() {
            return orbit_exit_code(e);
        }
        if let Some(e) = cause.downcast_ref::<IntegrationError>() {
            return match e {
                IntegrationError::Model(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return match e {
                ExperimentError::Config(_)
                | ExperimentError::Model(_)
                | ExperimentError::UnknownPreset(_)
                | ExperimentError::InvalidScan(_) => EXIT_CONFIG,
                ExperimentError::Orbit(e) => orbit_exit_code(e),
                ExperimentError::Integration(IntegrationError::Model(_)) => EXIT_CONFIG,
                ExperimentError::Integration(_) => EXIT_NUMERICAL,
                ExperimentError::Io { .. } | ExperimentError::EmptySeries => EXIT_FAILURE,
            };
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
