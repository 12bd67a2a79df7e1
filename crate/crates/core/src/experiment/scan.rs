//! Brute-force sweeps of one control parameter, recording the tail of the return map per cell.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::svg::PlotData;
use super::ExperimentError;
use crate::error::OrbitError;
use crate::integrator::{fmt_num, simulate, SimConfig};
use crate::model::{equilibria, nullcline_markers, ControlPolicy, Parameters, RegimeReport, State};
use crate::orbit::{
    build_orbit, floquet_multiplier, iterate_map, CycleOrder, MapIteration, OrbitOptions,
};

/// The control parameter being swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    P,
    Q,
    HB,
}

impl SweepKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKey::P => "p",
            SweepKey::Q => "q",
            SweepKey::HB => "H_b",
        }
    }

    fn apply(&self, policy: &ControlPolicy, value: f64) -> ControlPolicy {
        let mut out = *policy;
        match self {
            SweepKey::P => out.p = value,
            SweepKey::Q => out.q = value,
            SweepKey::HB => out.h_b = value,
        }
        out
    }
}

impl fmt::Display for SweepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p" => Ok(SweepKey::P),
            "q" => Ok(SweepKey::Q),
            "H_b" | "h_b" | "HB" => Ok(SweepKey::HB),
            other => Err(format!(
                "unknown sweep key `{other}` (expected p, q or H_b)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub n_transient: usize,
    pub n_record: usize,
    pub orbit: OrbitOptions,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            n_transient: 200,
            n_record: 50,
            orbit: OrbitOptions::default(),
        }
    }
}

/// Outcome token written in the `status` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    NoHit,
    NoEndemic,
    Unreachable,
    Invalid,
    Error,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NoHit => "nohit",
            CellStatus::NoEndemic => "no_endemic",
            CellStatus::Unreachable => "unreachable",
            CellStatus::Invalid => "invalid",
            CellStatus::Error => "error",
        }
    }
}

/// One recorded iterate of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub anchor_m: f64,
    pub m_pre: f64,
    pub flight_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub value: f64,
    pub status: CellStatus,
    pub order: Option<CycleOrder>,
    pub regime: Option<RegimeReport>,
    /// Period of the detected cycle (one or two flights).
    pub period: Option<f64>,
    pub mu: Option<f64>,
    pub rows: Vec<ScanRow>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub key: SweepKey,
    pub grid: Vec<f64>,
    pub cells: Vec<ScanCell>,
    pub n_record: usize,
    pub h_b: f64,
}

pub const SCAN_COLUMNS: [&str; 14] = [
    "value",
    "status",
    "order",
    "index",
    "anchor_M",
    "M_pre",
    "I_b_pre",
    "flight_time",
    "period",
    "mu",
    "abs_mu",
    "case_a",
    "case_b",
    "threshold_reachable",
];

impl ScanResult {
    /// One header line plus exactly `n_record` rows per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = SCAN_COLUMNS.to_vec();
        header[0] = self.key.as_str();
        out.push_str(&header.join(","));
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let flag = |r: &Option<RegimeReport>, f: fn(&RegimeReport) -> bool| {
            r.as_ref().map(|r| f(r).to_string()).unwrap_or_default()
        };
        for cell in &self.cells {
            let order = cell.order.map(|o| o.as_str()).unwrap_or("");
            let tail = format!(
                "{},{},{},{},{},{}",
                opt(cell.period),
                opt(cell.mu),
                opt(cell.mu.map(f64::abs)),
                flag(&cell.regime, |r| r.case_a),
                flag(&cell.regime, |r| r.case_b),
                flag(&cell.regime, |r| r.threshold_reachable),
            );
            for i in 0..self.n_record {
                let row = cell.rows.get(i);
                let h_b = if cell.status == CellStatus::Ok {
                    fmt_num(self.h_b_for(cell))
                } else {
                    String::new()
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    fmt_num(cell.value),
                    cell.status.as_str(),
                    order,
                    i,
                    opt(row.map(|r| r.anchor_m)),
                    opt(row.map(|r| r.m_pre)),
                    h_b,
                    opt(row.map(|r| r.flight_time)),
                    tail
                )
                .unwrap();
            }
        }
        out
    }

    fn h_b_for(&self, cell: &ScanCell) -> f64 {
        match self.key {
            SweepKey::HB => cell.value,
            _ => self.h_b,
        }
    }

    /// Recorded anchors against the swept value, for every successful cell.
    pub fn plot_data(&self) -> PlotData {
        PlotData::Bifurcation {
            key: self.key.as_str().to_string(),
            y_label: "M+".to_string(),
            points: self
                .cells
                .iter()
                .filter(|c| c.status == CellStatus::Ok)
                .flat_map(|c| c.rows.iter().map(move |r| (c.value, r.anchor_m)))
                .collect(),
        }
    }
}

/// Post-impulse mosquito level after the first impulse of the flow from `s0`,
/// or half of `M*` when the flow never reaches the guard.
pub fn seed_from_state(
    s0: State,
    params: &Parameters,
    policy: &ControlPolicy,
    sim: &SimConfig,
) -> f64 {
    let cfg = SimConfig {
        max_impulses: 1,
        ..*sim
    };
    let first = simulate(s0, params, Some(policy), &cfg)
        .ok()
        .and_then(|traj| traj.events.first().map(|e| e.post.m));
    match first {
        Some(m) if m > 0.0 => m,
        _ => {
            0.5 * equilibria(params)
                .endemic
                .map(|e| e.m)
                .unwrap_or(params.k_m)
        }
    }
}

fn run_cell(
    base: &ScenarioConfig,
    policy: &ControlPolicy,
    key: SweepKey,
    value: f64,
    settings: &ScanSettings,
) -> ScanCell {
    let params = &base.params;
    let mut cell = ScanCell {
        value,
        status: CellStatus::Ok,
        order: None,
        regime: None,
        period: None,
        mu: None,
        rows: Vec::new(),
        message: None,
    };
    let policy = key.apply(policy, value);
    if let Err(e) = policy.validate(params) {
        cell.status = CellStatus::Invalid;
        cell.message = Some(e.to_string());
        return cell;
    }
    cell.regime = nullcline_markers(params, &policy).ok();
    if equilibria(params).endemic.is_none() {
        cell.status = CellStatus::NoEndemic;
        return cell;
    }
    if cell.regime.is_some_and(|r| !r.threshold_reachable) {
        cell.status = CellStatus::Unreachable;
        return cell;
    }
    let opts = &settings.orbit;
    let x0 = seed_from_state(base.initial, params, &policy, &opts.sim);
    let iteration = match iterate_map(
        x0,
        params,
        &policy,
        settings.n_transient,
        settings.n_record,
        opts,
    ) {
        Ok(it) => it,
        Err(e) => {
            cell.status = match e {
                OrbitError::NoHit { .. } => CellStatus::NoHit,
                _ => CellStatus::Error,
            };
            cell.message = Some(e.to_string());
            return cell;
        }
    };
    cell.order = Some(iteration.order);
    cell.rows = rows_of(&iteration);
    let order = match iteration.order {
        CycleOrder::Order1 => 1,
        CycleOrder::Order2 => 2,
        CycleOrder::Undetermined => return cell,
    };
    let n = iteration.values.len();
    let anchor = iteration.values[n - 1 - (order - 1)];
    match build_orbit(anchor, order, params, &policy, opts).and_then(|orbit| {
        let report = floquet_multiplier(&orbit, params, &policy, opts)?;
        Ok((orbit.period, report.mu_analytic))
    }) {
        Ok((period, mu)) => {
            cell.period = Some(period);
            cell.mu = Some(mu);
        }
        Err(e) => cell.message = Some(e.to_string()),
    }
    cell
}

fn rows_of(it: &MapIteration) -> Vec<ScanRow> {
    (0..it.values.len())
        .map(|i| ScanRow {
            index: i,
            anchor_m: it.values[i],
            m_pre: it.m_at_guard[i],
            flight_time: it.flight_times[i],
        })
        .collect()
}

/// Sweeps `key` over `n` evenly spaced values in `[lo, hi]`, one independent cell per value.
///
/// Failures inside a cell are recorded in its status and never abort the sweep.
pub fn bifurcation_scan(
    base: &ScenarioConfig,
    key: SweepKey,
    lo: f64,
    hi: f64,
    n: usize,
    settings: &ScanSettings,
) -> Result<ScanResult, ExperimentError> {
    if n < 2 {
        return Err(ExperimentError::InvalidScan(format!(
            "need at least 2 cells, got {n}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ExperimentError::InvalidScan(format!(
            "empty range [{lo}, {hi}]"
        )));
    }
    if settings.n_record == 0 {
        return Err(ExperimentError::InvalidScan(
            "n_record must be positive".into(),
        ));
    }
    let policy = base.policy.ok_or_else(|| {
        ExperimentError::InvalidScan("the base scenario has no control policy".into())
    })?;
    base.params.validate()?;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let cells = grid
        .par_iter()
        .map(|&v| run_cell(base, &policy, key, v, settings))
        .collect();
    Ok(ScanResult {
        key,
        grid,
        cells,
        n_record: settings.n_record,
        h_b: policy.h_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        let params = Parameters {
            mu_m: 0.537,
            k_m: 1000.0,
            delta_m: 0.035,
            mu_b: 0.01,
            c: 0.09,
            beta_bm: 0.8,
            n_b: 400.0,
        };
        let policy = ControlPolicy::new(0.25, 0.45, 250.0).unwrap();
        ScenarioConfig::new(params, Some(policy), State::new(771.0, 137.0))
    }

    fn quick() -> ScanSettings {
        ScanSettings {
            n_transient: 30,
            n_record: 4,
            ..ScanSettings::default()
        }
    }

    #[test]
    fn row_count_and_status_tokens() {
        let result = bifurcation_scan(&base(), SweepKey::P, 0.2, 1.0, 3, &quick()).unwrap();
        let statuses: Vec<_> = result.cells.iter().map(|c| c.status).collect();
        assert_eq!(
            statuses,
            vec![CellStatus::Ok, CellStatus::Ok, CellStatus::Invalid]
        );
        let csv = result.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 * 4);
        assert!(csv.starts_with("p,status,order,"));
        assert!(csv.lines().last().unwrap().contains(",invalid,"));
    }

    #[test]
    fn unreachable_cells_are_marked() {
        let result = bifurcation_scan(&base(), SweepKey::HB, 300.0, 390.0, 2, &quick()).unwrap();
        assert_eq!(result.cells[0].status, CellStatus::Ok);
        assert_eq!(result.cells[1].status, CellStatus::Unreachable);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(
            bifurcation_scan(&base(), SweepKey::Q, 0.4, 0.5, 1, &quick()),
            Err(ExperimentError::InvalidScan(_))
        ));
        assert!(bifurcation_scan(&base(), SweepKey::Q, 0.5, 0.4, 5, &quick()).is_err());
    }

    #[test]
    fn sweep_keys_parse() {
        assert_eq!("H_b".parse::<SweepKey>().unwrap(), SweepKey::HB);
        assert!("mu_m".parse::<SweepKey>().is_err());
    }
}
