//! Built-in scenarios with their parameter values baked in.

use std::path::Path;

use super::config::ScenarioConfig;
use super::scan::{bifurcation_scan, ScanResult, ScanSettings, SweepKey};
use super::scenario::{run_scenario, timeseries, RunSettings, ScenarioSummary};
use super::svg::{emit_svg, PlotData};
use super::{write_file, ExperimentError};
use crate::integrator::{simulate, SimConfig};
use crate::model::{ControlPolicy, Parameters, State};

pub const PRESET_NAMES: [&str; 8] = [
    "fig3", "fig4", "fig5a", "fig5b", "fig6", "fig7a", "fig7b", "fig8",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub key: SweepKey,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// A named scenario, optional labelled variants drawn on a shared time-series plot, and an optional sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub base: ScenarioConfig,
    pub variants: Vec<(String, ScenarioConfig)>,
    pub scan: Option<ScanSpec>,
}

fn params(mu_m: f64, delta_m: f64) -> Parameters {
    Parameters {
        mu_m,
        k_m: 1000.0,
        delta_m,
        mu_b: 0.01,
        c: 0.09,
        beta_bm: 0.8,
        n_b: 400.0,
    }
}

fn policy(p: f64, q: f64) -> ControlPolicy {
    ControlPolicy::new(p, q, 250.0).expect("preset policies are in range")
}

fn scenario(
    params: Parameters,
    policy: Option<ControlPolicy>,
    initial: (f64, f64),
    t_max: f64,
) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(params, policy, State::new(initial.0, initial.1));
    cfg.t_max = t_max;
    cfg
}

fn variants(
    params: Parameters,
    initial: (f64, f64),
    t_max: f64,
    label: &str,
    values: &[f64],
    make: impl Fn(f64) -> ControlPolicy,
) -> Vec<(String, ScenarioConfig)> {
    values
        .iter()
        .map(|&v| {
            (
                format!("{label}={v}"),
                scenario(params, Some(make(v)), initial, t_max),
            )
        })
        .collect()
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset, ExperimentError> {
    let slow = params(0.06, 0.05);
    let fast = params(0.537, 0.035);
    let preset = match name {
        "fig3" => Preset {
            name: "fig3",
            description:
                "uncontrolled approach to the endemic equilibrium, compared with the controlled run",
            base: scenario(fast, None, (771.0, 137.0), 400.0),
            variants: vec![
                (
                    "uncontrolled".into(),
                    scenario(fast, None, (771.0, 137.0), 200.0),
                ),
                (
                    "controlled".into(),
                    scenario(fast, Some(policy(0.15, 0.45)), (771.0, 137.0), 200.0),
                ),
            ],
            scan: None,
        },
        "fig4" => Preset {
            name: "fig4",
            description: "order-1 cycle with slow mosquito growth",
            base: scenario(
                params(0.06, 0.04),
                Some(policy(0.8, 0.3)),
                (29.0, 175.0),
                2000.0,
            ),
            variants: Vec::new(),
            scan: None,
        },
        "fig5a" => Preset {
            name: "fig5a",
            description: "effect of the curing fraction q with p = 0.8",
            base: scenario(slow, Some(policy(0.8, 0.25)), (29.0, 175.0), 2000.0),
            variants: variants(slow, (29.0, 175.0), 2000.0, "q", &[0.35, 0.3, 0.25], |q| {
                policy(0.8, q)
            }),
            scan: None,
        },
        "fig5b" => Preset {
            name: "fig5b",
            description: "effect of the culling fraction p with q = 0.25",
            base: scenario(slow, Some(policy(0.8, 0.25)), (29.0, 175.0), 2000.0),
            variants: variants(slow, (29.0, 175.0), 2000.0, "p", &[0.85, 0.8, 0.75], |p| {
                policy(p, 0.25)
            }),
            scan: None,
        },
        "fig6" => Preset {
            name: "fig6",
            description: "order-1 cycle with fast mosquito growth",
            base: scenario(
                params(0.357, 0.035),
                Some(policy(0.15, 0.45)),
                (771.0, 137.0),
                200.0,
            ),
            variants: Vec::new(),
            scan: None,
        },
        "fig7a" => Preset {
            name: "fig7a",
            description: "effect of the curing fraction q with p = 0.15",
            base: scenario(fast, Some(policy(0.15, 0.45)), (771.0, 137.0), 200.0),
            variants: variants(fast, (771.0, 137.0), 200.0, "q", &[0.45, 0.4, 0.35], |q| {
                policy(0.15, q)
            }),
            scan: None,
        },
        "fig7b" => Preset {
            name: "fig7b",
            description: "effect of the culling fraction p with q = 0.45",
            base: scenario(fast, Some(policy(0.15, 0.45)), (771.0, 137.0), 200.0),
            variants: variants(fast, (771.0, 137.0), 200.0, "p", &[0.25, 0.2, 0.15], |p| {
                policy(p, 0.45)
            }),
            scan: None,
        },
        "fig8" => Preset {
            name: "fig8",
            description: "bifurcation sweep over q in [0.45, 0.75] with p = 0.25",
            base: scenario(fast, Some(policy(0.25, 0.45)), (771.0, 137.0), 200.0),
            variants: Vec::new(),
            scan: Some(ScanSpec {
                key: SweepKey::Q,
                lo: 0.45,
                hi: 0.75,
                n: 61,
            }),
        },
        other => return Err(ExperimentError::UnknownPreset(other.to_string())),
    };
    Ok(preset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetOutcome {
    pub base: ScenarioSummary,
    pub variants: Vec<(String, ScenarioSummary)>,
    pub scan: Option<ScanResult>,
}

/// Runs the base scenario into `out_dir`, each variant into its own subdirectory, and the sweep if any.
pub fn run_preset(
    preset: &Preset,
    out_dir: &Path,
    settings: &RunSettings,
    scan_settings: &ScanSettings,
) -> Result<PresetOutcome, ExperimentError> {
    let base = run_scenario(&preset.base, out_dir, settings)?;
    let mut variant_summaries = Vec::with_capacity(preset.variants.len());
    let mut series = Vec::with_capacity(preset.variants.len());
    for (label, cfg) in &preset.variants {
        let dir = out_dir.join(label.replace('=', "_"));
        variant_summaries.push((label.clone(), run_scenario(cfg, &dir, settings)?));
        let sim = SimConfig {
            t_max: cfg.t_max,
            ..settings.orbit.sim
        };
        let traj = simulate(cfg.initial, &cfg.params, cfg.policy.as_ref(), &sim)?;
        series.push(timeseries(&traj, label));
    }
    if !series.is_empty() {
        emit_svg(
            &PlotData::Timeseries { series },
            &out_dir.join("comparison.svg"),
        )?;
    }
    let scan = match preset.scan {
        Some(spec) => {
            let result = bifurcation_scan(
                &preset.base,
                spec.key,
                spec.lo,
                spec.hi,
                spec.n,
                scan_settings,
            )?;
            write_file(&out_dir.join("scan.csv"), &result.to_csv())?;
            emit_svg(&result.plot_data(), &out_dir.join("bifurcation.svg"))?;
            Some(result)
        }
        None => None,
    };
    Ok(PresetOutcome {
        base,
        variants: variant_summaries,
        scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_preset_validates() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            p.base.validate().unwrap();
            for (_, cfg) in &p.variants {
                cfg.validate().unwrap();
            }
        }
        assert!(matches!(
            preset("fig9"),
            Err(ExperimentError::UnknownPreset(_))
        ));
    }
}
