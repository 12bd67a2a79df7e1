//! Scenario configuration, presets, scans and plotting.

pub mod config;
pub mod presets;
pub mod scan;
pub mod scenario;
pub mod svg;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::{IntegrationError, ModelError, OrbitError};

pub use config::{parse_config, parse_config_str, ConfigError, OutputKind, ScenarioConfig};
pub use presets::{preset, run_preset, Preset, PRESET_NAMES};
pub use scan::{bifurcation_scan, CellStatus, ScanResult, ScanRow, ScanSettings, SweepKey};
pub use scenario::{run_scenario, RunSettings, ScenarioSummary};
pub use svg::{emit_svg, render_svg, PlotData, PlotKind, Series};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("nothing to plot")]
    EmptySeries,
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid scan: {0}")]
    InvalidScan(String),
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads; `None` uses the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}
