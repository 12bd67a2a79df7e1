//! Plain-text `key=value` scenario files.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. The
//! model keys are `mu_m, K_m, delta_m, mu_b, c, beta_bm, N_b`; the control
//! keys `p, q, H_b` must appear all together or not at all. `M0` and `I_b0`
//! are required, `t_max`, `resample_dt` and `outputs` are optional.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::ExperimentError;
use crate::error::ModelError;
use crate::model::{ControlPolicy, Parameters, State};

pub const MODEL_KEYS: [&str; 7] = ["mu_m", "K_m", "delta_m", "mu_b", "c", "beta_bm", "N_b"];
pub const POLICY_KEYS: [&str; 3] = ["p", "q", "H_b"];
const RUN_KEYS: [&str; 5] = ["M0", "I_b0", "t_max", "resample_dt", "outputs"];

pub const DEFAULT_T_MAX: f64 = 1e4;
pub const DEFAULT_RESAMPLE_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutputKind {
    TrajectoryCsv,
    PhaseSvg,
    TimeseriesSvg,
    Report,
}

impl OutputKind {
    pub const ALL: [OutputKind; 4] = [
        OutputKind::TrajectoryCsv,
        OutputKind::PhaseSvg,
        OutputKind::TimeseriesSvg,
        OutputKind::Report,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OutputKind::TrajectoryCsv => "trajectory_csv",
            OutputKind::PhaseSvg => "phase_svg",
            OutputKind::TimeseriesSvg => "timeseries_svg",
            OutputKind::Report => "report",
        }
    }
}

impl FromStr for OutputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown output kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: Parameters,
    pub policy: Option<ControlPolicy>,
    pub initial: State,
    pub t_max: f64,
    pub resample_dt: f64,
    pub outputs: BTreeSet<OutputKind>,
}

impl ScenarioConfig {
    pub fn new(params: Parameters, policy: Option<ControlPolicy>, initial: State) -> Self {
        Self {
            params,
            policy,
            initial,
            t_max: DEFAULT_T_MAX,
            resample_dt: DEFAULT_RESAMPLE_DT,
            outputs: OutputKind::ALL.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| from_model(e, None))?;
        if let Some(policy) = &self.policy {
            policy
                .validate(&self.params)
                .map_err(|e| from_model(e, None))?;
        }
        self.initial
            .validate(&self.params)
            .map_err(|e| from_model(e, None))?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(ConfigError::Domain {
                line: None,
                key: "t_max".into(),
                value: self.t_max.to_string(),
                constraint: "finite and > 0".into(),
            });
        }
        if !(self.resample_dt > 0.0 && self.resample_dt.is_finite()) {
            return Err(ConfigError::Domain {
                line: None,
                key: "resample_dt".into(),
                value: self.resample_dt.to_string(),
                constraint: "finite and > 0".into(),
            });
        }
        Ok(())
    }

    /// Serializes back into the file format accepted by [`parse_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.params.to_key_values() {
            out.push_str(&format!("{k}={v}\n"));
        }
        if let Some(policy) = &self.policy {
            for (k, v) in policy.to_key_values() {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out.push_str(&format!(
            "M0={}\nI_b0={}\n",
            self.initial.m, self.initial.i_b
        ));
        out.push_str(&format!(
            "t_max={}\nresample_dt={}\n",
            self.t_max, self.resample_dt
        ));
        let outputs: Vec<&str> = self.outputs.iter().map(|o| o.as_str()).collect();
        out.push_str(&format!("outputs={}\n", outputs.join(",")));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax {
        line: usize,
        text: String,
    },
    UnknownKey {
        line: usize,
        key: String,
    },
    DuplicateKey {
        line: usize,
        key: String,
    },
    MissingKey(String),
    Domain {
        line: Option<usize>,
        key: String,
        value: String,
        constraint: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => {
                write!(f, "line {line}: expected key=value, got `{text}`")
            }
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key `{key}`"),
            ConfigError::DuplicateKey { line, key } => {
                write!(f, "line {line}: duplicate key `{key}`")
            }
            ConfigError::MissingKey(key) => write!(f, "missing required key `{key}`"),
            ConfigError::Domain {
                line,
                key,
                value,
                constraint,
            } => {
                if let Some(line) = line {
                    write!(f, "line {line}: ")?;
                }
                write!(f, "{key} = {value} violates {constraint}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn model_key(e: &ModelError) -> Option<&'static str> {
    match e {
        ModelError::OutOfDomain { key, .. } => Some(key),
        ModelError::ThresholdAboveHosts { .. } => Some("H_b"),
        ModelError::InvalidState { .. } => None,
    }
}

fn from_model(e: ModelError, line: Option<usize>) -> ConfigError {
    match e {
        ModelError::OutOfDomain {
            key,
            value,
            constraint,
        } => ConfigError::Domain {
            line,
            key: key.to_string(),
            value: value.to_string(),
            constraint: constraint.to_string(),
        },
        ModelError::ThresholdAboveHosts { h_b, n_b } => ConfigError::Domain {
            line,
            key: "H_b".into(),
            value: h_b.to_string(),
            constraint: format!("H_b < N_b = {n_b}"),
        },
        ModelError::InvalidState { reason } => ConfigError::Domain {
            line,
            key: "M0/I_b0".into(),
            value: String::new(),
            constraint: reason,
        },
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config_str(&text)?)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            text: raw.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let known =
            MODEL_KEYS.contains(&key) || POLICY_KEYS.contains(&key) || RUN_KEYS.contains(&key);
        if !known {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        if entries.insert(key, (line_no, value)).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
    }

    let number = |key: &str| -> Result<Option<(usize, f64)>, ConfigError> {
        match entries.get(key) {
            None => Ok(None),
            Some(&(line, value)) => value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| Some((line, v)))
                .ok_or_else(|| ConfigError::Domain {
                    line: Some(line),
                    key: key.to_string(),
                    value: value.to_string(),
                    constraint: "a finite number".into(),
                }),
        }
    };
    let required = |key: &str| -> Result<(usize, f64), ConfigError> {
        number(key)?.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    };

    let mut model = [0.0; 7];
    let mut model_lines = [0usize; 7];
    for (i, key) in MODEL_KEYS.iter().enumerate() {
        let (line, v) = required(key)?;
        model[i] = v;
        model_lines[i] = line;
    }
    let params = Parameters {
        mu_m: model[0],
        k_m: model[1],
        delta_m: model[2],
        mu_b: model[3],
        c: model[4],
        beta_bm: model[5],
        n_b: model[6],
    };
    let line_of = |key: &str| entries.get(key).map(|e| e.0);
    params.validate().map_err(|e| {
        let line = model_key(&e).and_then(line_of);
        from_model(e, line)
    })?;

    let present: Vec<&str> = POLICY_KEYS
        .iter()
        .copied()
        .filter(|k| entries.contains_key(k))
        .collect();
    let policy = match present.len() {
        0 => None,
        3 => {
            let (_, p) = required("p")?;
            let (_, q) = required("q")?;
            let (_, h_b) = required("H_b")?;
            let policy = ControlPolicy { p, q, h_b };
            policy.validate(&params).map_err(|e| {
                let line = model_key(&e).and_then(line_of);
                from_model(e, line)
            })?;
            Some(policy)
        }
        _ => {
            let missing = POLICY_KEYS
                .iter()
                .find(|k| !entries.contains_key(*k))
                .unwrap();
            return Err(ConfigError::MissingKey(format!(
                "{missing} (p, q and H_b must be given together)"
            )));
        }
    };

    let (_, m0) = required("M0")?;
    let (ib_line, ib0) = required("I_b0")?;
    let initial = State::new(m0, ib0);
    initial
        .validate(&params)
        .map_err(|e| from_model(e, Some(ib_line)))?;

    let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
        match number(key)? {
            None => Ok(default),
            Some((_, v)) if v > 0.0 => Ok(v),
            Some((line, v)) => Err(ConfigError::Domain {
                line: Some(line),
                key: key.to_string(),
                value: v.to_string(),
                constraint: "> 0".into(),
            }),
        }
    };
    let t_max = positive("t_max", DEFAULT_T_MAX)?;
    let resample_dt = positive("resample_dt", DEFAULT_RESAMPLE_DT)?;

    let outputs = match entries.get("outputs") {
        None => OutputKind::ALL.into_iter().collect(),
        Some(&(line, value)) => value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<OutputKind>().map_err(|_| ConfigError::Domain {
                    line: Some(line),
                    key: "outputs".into(),
                    value: s.to_string(),
                    constraint: "one of trajectory_csv, phase_svg, timeseries_svg, report".into(),
                })
            })
            .collect::<Result<BTreeSet<_>, _>>()?,
    };

    Ok(ScenarioConfig {
        params,
        policy,
        initial,
        t_max,
        resample_dt,
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG6: &str = "\
# fig6 settings
mu_m=0.357
K_m=1000
delta_m=0.035
mu_b=0.01
c=0.09
beta_bm=0.8
N_b=400
p=0.15
q=0.45
H_b=250
M0=771
I_b0=137   # near the phase line
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = parse_config_str(FIG6).unwrap();
        assert_eq!(cfg.params.mu_m, 0.357);
        assert_eq!(cfg.params.n_b, 400.0);
        assert_eq!(cfg.policy.unwrap().h_b, 250.0);
        assert_eq!(cfg.initial, State::new(771.0, 137.0));
        assert_eq!(cfg.t_max, DEFAULT_T_MAX);
        assert_eq!(cfg.outputs.len(), 4);
        let again = parse_config_str(&cfg.to_config_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn fraction_out_of_range_names_key() {
        let text = FIG6.replace("p=0.15", "p=1.3");
        match parse_config_str(&text) {
            Err(ConfigError::Domain {
                key,
                constraint,
                line,
                ..
            }) => {
                assert_eq!(key, "p");
                assert_eq!(constraint, "(0, 1)");
                assert_eq!(line, Some(9));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_is_optional() {
        let text: String = FIG6
            .lines()
            .filter(|l| !(l.starts_with("p=") || l.starts_with("q=") || l.starts_with("H_b=")))
            .map(|l| format!("{l}\n"))
            .collect();
        let cfg = parse_config_str(&text).unwrap();
        assert!(cfg.policy.is_none());
    }

    #[test]
    fn partial_policy_is_rejected() {
        let text = FIG6.replace("q=0.45\n", "");
        assert!(
            matches!(parse_config_str(&text), Err(ConfigError::MissingKey(k)) if k.starts_with('q'))
        );
    }

    #[test]
    fn unknown_duplicate_missing() {
        let text = format!("{FIG6}sigma=2\n");
        assert_eq!(
            parse_config_str(&text),
            Err(ConfigError::UnknownKey {
                line: 14,
                key: "sigma".into()
            })
        );
        let text = format!("{FIG6}c=0.1\n");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::DuplicateKey { line: 14, .. })
        ));
        let text = FIG6.replace("N_b=400\n", "");
        assert_eq!(
            parse_config_str(&text),
            Err(ConfigError::MissingKey("N_b".into()))
        );
        let text = FIG6.replace("M0=771", "M0 771");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::Syntax { line: 12, .. })
        ));
    }

    #[test]
    fn outputs_and_run_keys() {
        let text = format!("{FIG6}outputs=report, phase_svg\nt_max=50\nresample_dt=0.5\n");
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(
            cfg.outputs,
            [OutputKind::PhaseSvg, OutputKind::Report]
                .into_iter()
                .collect()
        );
        assert_eq!(cfg.t_max, 50.0);
        assert_eq!(cfg.resample_dt, 0.5);
        let text = format!("{FIG6}outputs=gif\n");
        assert!(parse_config_str(&text).is_err());
        let text = format!("{FIG6}resample_dt=0\n");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn threshold_must_be_below_hosts() {
        let text = FIG6.replace("H_b=250", "H_b=450");
        assert!(
            matches!(parse_config_str(&text), Err(ConfigError::Domain { key, .. }) if key == "H_b")
        );
    }
}
