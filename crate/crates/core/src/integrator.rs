//! Threshold-triggered impulsive simulation of the planar model and of the
//! three-compartment model it reduces from.
//!
//! The continuous flow runs while `I_b < H_b`. When an accepted step carries
//! `I_b` up through `H_b` the crossing is refined on the step interpolant, the
//! segment ends there and the reset `M -> (1-p) M`, `I_b -> (1-q) H_b` is applied.

use std::fmt::Write as _;

use crate::dopri::{self, DenseStep, Guard, SolverOptions, Stop};
use crate::error::{IntegrationError, ModelError};
use crate::model::{vector_field, ControlPolicy, Parameters, State};

/// Relative event tolerance: crossings are refined to `|I_b - H_b| <= EVENT_REL_TOL * H_b`.
pub const EVENT_REL_TOL: f64 = 1e-10;
/// Grazing threshold relative to `mu_b * H_b`.
pub const GRAZING_REL_TOL: f64 = 1e-10;

/// Integration limits and tolerances shared by every simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub solver: SolverOptions,
    /// Final time of a simulation, or flight-time budget of a single segment (days).
    pub t_max: f64,
    pub max_impulses: usize,
    pub event_rel_tol: f64,
    /// When set, uncontrolled segments end as `Converged` once the field is this small.
    pub stationary_tol: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            t_max: 1e4,
            max_impulses: 100_000,
            event_rel_tol: EVENT_REL_TOL,
            stationary_tol: None,
        }
    }
}

impl SimConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            solver: SolverOptions::with_tolerances(rel_tol, abs_tol),
            ..Self::default()
        }
    }
}

/// A point of phase space that the impulsive machinery can drive.
pub trait PhaseState<const N: usize>: Copy + std::fmt::Debug {
    fn to_array(&self) -> [f64; N];
    fn from_array(y: [f64; N]) -> Self;
    /// Index of `I_b` in the array form.
    const INFECTED: usize;
    const CSV_COLUMNS: &'static [&'static str];

    fn infected(&self) -> f64 {
        self.to_array()[Self::INFECTED]
    }
}

impl PhaseState<2> for State {
    const INFECTED: usize = 1;
    const CSV_COLUMNS: &'static [&'static str] = &["M", "I_b"];

    fn to_array(&self) -> [f64; 2] {
        self.as_array()
    }

    fn from_array(y: [f64; 2]) -> Self {
        State::from_array(y)
    }
}

/// State of the un-reduced model with susceptible birds tracked explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullState3D {
    pub m: f64,
    pub s_b: f64,
    pub i_b: f64,
}

impl FullState3D {
    pub fn new(m: f64, s_b: f64, i_b: f64) -> Self {
        Self { m, s_b, i_b }
    }

    pub fn birds(&self) -> f64 {
        self.s_b + self.i_b
    }

    pub fn project(&self) -> State {
        State::new(self.m, self.i_b)
    }
}

impl PhaseState<3> for FullState3D {
    const INFECTED: usize = 2;
    const CSV_COLUMNS: &'static [&'static str] = &["M", "S_b", "I_b"];

    fn to_array(&self) -> [f64; 3] {
        [self.m, self.s_b, self.i_b]
    }

    fn from_array(y: [f64; 3]) -> Self {
        Self {
            m: y[0],
            s_b: y[1],
            i_b: y[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Impulse,
    TMax,
    Converged,
}

/// Continuous flow between two impulses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment<S, const N: usize> {
    pub t_start: f64,
    pub t_end: f64,
    /// Accepted mesh points, strictly increasing in `t`.
    pub samples: Vec<(f64, S)>,
    pub dense: Vec<DenseStep<N>>,
    pub terminated_by: Termination,
}

impl<S: PhaseState<N>, const N: usize> TrajectorySegment<S, N> {
    pub fn start_state(&self) -> S {
        self.samples[0].1
    }

    pub fn end_state(&self) -> S {
        self.samples[self.samples.len() - 1].1
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Dense-output evaluation anywhere inside the segment.
    pub fn state_at(&self, t: f64) -> Option<S> {
        if t < self.t_start || t > self.t_end {
            return None;
        }
        if t == self.t_end {
            return Some(self.end_state());
        }
        if self.dense.is_empty() {
            return Some(self.start_state());
        }
        let idx = self.dense.partition_point(|s| s.t0 <= t).saturating_sub(1);
        Some(S::from_array(self.dense[idx].eval(t)))
    }
}

/// Reset applied on the guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseEvent<S> {
    pub t: f64,
    pub pre: S,
    pub post: S,
    pub index: usize,
    /// Flow was (numerically) tangent to the guard at the hit.
    pub grazing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationEnd {
    TMax,
    MaxImpulses,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, const N: usize> {
    pub segments: Vec<TrajectorySegment<S, N>>,
    pub events: Vec<ImpulseEvent<S>>,
    pub initial: S,
    pub params: Parameters,
    pub policy: Option<ControlPolicy>,
    pub end: SimulationEnd,
}

pub type Segment = TrajectorySegment<State, 2>;
pub type Trajectory2D = Trajectory<State, 2>;
pub type Trajectory3D = Trajectory<FullState3D, 3>;

impl<S: PhaseState<N>, const N: usize> Trajectory<S, N> {
    pub fn final_state(&self) -> S {
        self.segments
            .last()
            .map(|s| s.end_state())
            .unwrap_or(self.initial)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map(|s| s.t_end).unwrap_or(0.0)
    }

    /// All mesh samples in time order; pre/post impulse pairs appear at equal `t`.
    pub fn samples(&self) -> impl Iterator<Item = &(f64, S)> {
        self.segments.iter().flat_map(|s| s.samples.iter())
    }

    /// Plain-text CSV with header `t,<columns>,event`, resampled every `dt` days.
    ///
    /// Each impulse contributes two rows at equal `t` tagged `impulse_pre` and
    /// `impulse_post` (or `grazing_*` when the hit was tangential).
    pub fn to_csv(&self, dt: f64) -> String {
        assert!(dt > 0.0, "resample step must be positive");
        let mut out = String::new();
        out.push('t');
        for c in S::CSV_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",event\n");

        for (k, seg) in self.segments.iter().enumerate() {
            let degenerate = seg.t_end == seg.t_start;
            if k == 0 && !degenerate {
                push_row(&mut out, seg.t_start, &seg.start_state(), "");
            }
            let mut i = (seg.t_start / dt).floor() as i64 + 1;
            loop {
                let t = i as f64 * dt;
                if t >= seg.t_end {
                    break;
                }
                if t > seg.t_start {
                    if let Some(s) = seg.state_at(t) {
                        push_row(&mut out, t, &s, "");
                    }
                }
                i += 1;
            }
            match (seg.terminated_by, self.events.get(k)) {
                (Termination::Impulse, Some(ev)) => {
                    let (pre, post) = if ev.grazing {
                        ("grazing_pre", "grazing_post")
                    } else {
                        ("impulse_pre", "impulse_post")
                    };
                    push_row(&mut out, ev.t, &ev.pre, pre);
                    push_row(&mut out, ev.t, &ev.post, post);
                }
                _ => push_row(&mut out, seg.t_end, &seg.end_state(), ""),
            }
        }
        out
    }
}

fn push_row<S: PhaseState<N>, const N: usize>(out: &mut String, t: f64, s: &S, event: &str) {
    write!(out, "{}", fmt_num(t)).unwrap();
    for v in s.to_array() {
        write!(out, ",{}", fmt_num(v)).unwrap();
    }
    writeln!(out, ",{event}").unwrap();
}

/// 17 significant digits, `.` decimal point.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Analytic logistic solution of the decoupled mosquito equation.
///
/// With `r = mu_m - delta_m` and `a = mu_m / K_m`,
/// `M(t) = M0 / (e^{-rt} + a M0 (1 - e^{-rt}) / r)`. This is the usual
/// `M* M0 e^{rt} / (M* + M0 (e^{rt} - 1))` divided through by `e^{rt}`, so it
/// neither overflows for large `t` nor needs a separate `r < 0` branch; it
/// tends to `M0 / (1 + a M0 t)` as `r -> 0`.
pub fn logistic_closed_form(m0: f64, t: f64, params: &Parameters) -> f64 {
    if m0 == 0.0 {
        return 0.0;
    }
    let r = params.net_growth();
    let a = params.mu_m / params.k_m;
    let rt = r * t;
    let saturation = if rt.abs() < 1e-8 {
        t * (1.0 - 0.5 * rt)
    } else {
        -(-rt).exp_m1() / r
    };
    m0 / ((-rt).exp() + a * m0 * saturation)
}

/// Reset map `((1-p) M, (1-q) I_b)`.
pub fn apply_impulse(s: State, policy: &ControlPolicy) -> State {
    State::new((1.0 - policy.p) * s.m, (1.0 - policy.q) * s.i_b)
}

fn planar_field(params: Parameters) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |_t, y| {
        let r = vector_field(State::from_array(*y), &params);
        [r.dm_dt, r.dib_dt]
    }
}

fn full_field(params: Parameters) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |_t, y| {
        let [m, s_b, i_b] = *y;
        let total = s_b + i_b;
        let force = params.infection_rate() * s_b / total * m;
        [
            params.mu_m * m * (1.0 - m / params.k_m) - params.delta_m * m,
            params.mu_b * total - force - params.mu_b * s_b,
            force - params.mu_b * i_b,
        ]
    }
}

fn flow<S, F, const N: usize>(
    field: &F,
    s0: S,
    t0: f64,
    t_final: f64,
    h_b: Option<f64>,
    cfg: &SimConfig,
) -> Result<TrajectorySegment<S, N>, IntegrationError>
where
    S: PhaseState<N>,
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let guard = h_b.map(|level| Guard {
        component: S::INFECTED,
        level,
        tolerance: cfg.event_rel_tol * level,
    });
    let stationary = if h_b.is_none() {
        cfg.stationary_tol
    } else {
        None
    };
    let run = dopri::integrate(
        field,
        t0,
        s0.to_array(),
        t_final,
        guard,
        stationary,
        &cfg.solver,
    )?;
    let terminated_by = match run.stop {
        Stop::Guard { .. } => Termination::Impulse,
        Stop::TMax => Termination::TMax,
        Stop::Stationary => Termination::Converged,
    };
    let t_end = run.t_end();
    Ok(TrajectorySegment {
        t_start: t0,
        t_end,
        samples: run
            .samples
            .into_iter()
            .map(|(t, y)| (t, S::from_array(y)))
            .collect(),
        dense: run.steps,
        terminated_by,
    })
}

/// Flows from `s0` at time 0 until the guard `I_b = H_b` is hit or `t_max` elapses.
///
/// `terminated_by == TMax` under an active policy is the NoHit outcome.
pub fn integrate_segment(
    s0: State,
    params: &Parameters,
    policy: Option<&ControlPolicy>,
    t_max: f64,
    cfg: &SimConfig,
) -> Result<Segment, IntegrationError> {
    integrate_segment_from(0.0, s0, params, policy, t_max, cfg)
}

/// As [`integrate_segment`], starting at time `t0` and ending no later than `t_final`.
pub fn integrate_segment_from(
    t0: f64,
    s0: State,
    params: &Parameters,
    policy: Option<&ControlPolicy>,
    t_final: f64,
    cfg: &SimConfig,
) -> Result<Segment, IntegrationError> {
    s0.validate(params)?;
    if let Some(policy) = policy {
        policy.validate(params)?;
        if s0.i_b >= policy.h_b {
            return Err(ModelError::InvalidState {
                reason: format!(
                    "segment must start below the guard: I_b = {} >= H_b = {}",
                    s0.i_b, policy.h_b
                ),
            }
            .into());
        }
    }
    // M = 0 is invariant and I_b then only decays, so the guard (which needs M > 0) is unreachable.
    let h_b = policy.map(|p| p.h_b);
    flow(&planar_field(*params), s0, t0, t_final, h_b, cfg)
}

fn is_grazing(rate: f64, policy: &ControlPolicy, params: &Parameters) -> bool {
    rate.abs() < GRAZING_REL_TOL * params.mu_b * policy.h_b
}

fn degenerate_segment<S: PhaseState<N>, const N: usize>(t: f64, s: S) -> TrajectorySegment<S, N> {
    TrajectorySegment {
        t_start: t,
        t_end: t,
        samples: vec![(t, s)],
        dense: Vec::new(),
        terminated_by: Termination::Impulse,
    }
}

/// Alternates flow and reset until `cfg.t_max` or `cfg.max_impulses`.
///
/// An initial state at or above the guard is reset at `t = 0+` before flowing
/// (repeatedly, if one reset is not enough to get below `H_b`); each such reset
/// is recorded as an event ending a zero-length segment.
pub fn simulate(
    s0: State,
    params: &Parameters,
    policy: Option<&ControlPolicy>,
    cfg: &SimConfig,
) -> Result<Trajectory2D, IntegrationError> {
    params.validate()?;
    s0.validate(params)?;
    if let Some(policy) = policy {
        policy.validate(params)?;
    }
    let mut segments = Vec::new();
    let mut events: Vec<ImpulseEvent<State>> = Vec::new();
    let mut t = 0.0;
    let mut state = s0;

    if let Some(policy) = policy {
        while state.i_b >= policy.h_b && events.len() < cfg.max_impulses {
            let post = apply_impulse(state, policy);
            segments.push(degenerate_segment(t, state));
            events.push(ImpulseEvent {
                t,
                pre: state,
                post,
                index: events.len(),
                grazing: false,
            });
            state = post;
        }
    }

    let field = planar_field(*params);
    loop {
        if events.len() >= cfg.max_impulses && policy.is_some() {
            return Ok(Trajectory {
                segments,
                events,
                initial: s0,
                params: *params,
                policy: policy.copied(),
                end: SimulationEnd::MaxImpulses,
            });
        }
        let seg = flow(&field, state, t, cfg.t_max, policy.map(|p| p.h_b), cfg)?;
        let termination = seg.terminated_by;
        let pre = seg.end_state();
        t = seg.t_end;
        segments.push(seg);
        match (termination, policy) {
            (Termination::Impulse, Some(policy)) => {
                let post = State::new((1.0 - policy.p) * pre.m, policy.phase_level());
                let rate = vector_field(pre, params).dib_dt;
                events.push(ImpulseEvent {
                    t,
                    pre,
                    post,
                    index: events.len(),
                    grazing: is_grazing(rate, policy, params),
                });
                state = post;
            }
            (Termination::Converged, _) => {
                return Ok(Trajectory {
                    segments,
                    events,
                    initial: s0,
                    params: *params,
                    policy: policy.copied(),
                    end: SimulationEnd::Converged,
                })
            }
            _ => {
                return Ok(Trajectory {
                    segments,
                    events,
                    initial: s0,
                    params: *params,
                    policy: policy.copied(),
                    end: SimulationEnd::TMax,
                })
            }
        }
    }
}

/// Simulates the three-compartment model, resetting `S_b -> S_b + q I_b` alongside the planar resets.
///
/// Requires `S_b + I_b = N_b` at the start (relative tolerance 1e-12).
pub fn simulate_full_3d(
    s0: FullState3D,
    params: &Parameters,
    policy: Option<&ControlPolicy>,
    cfg: &SimConfig,
) -> Result<Trajectory3D, IntegrationError> {
    params.validate()?;
    if let Some(policy) = policy {
        policy.validate(params)?;
    }
    if s0.m < 0.0 || s0.s_b < 0.0 || s0.i_b < 0.0 {
        return Err(ModelError::InvalidState {
            reason: format!("compartments must be nonnegative: {s0:?}"),
        }
        .into());
    }
    if (s0.birds() - params.n_b).abs() > 1e-12 * params.n_b {
        return Err(ModelError::InvalidState {
            reason: format!("S_b + I_b = {} must equal N_b = {}", s0.birds(), params.n_b),
        }
        .into());
    }

    let reset = |s: FullState3D, policy: &ControlPolicy| FullState3D {
        m: (1.0 - policy.p) * s.m,
        s_b: s.s_b + policy.q * s.i_b,
        i_b: (1.0 - policy.q) * s.i_b,
    };

    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut state = s0;
    if let Some(policy) = policy {
        while state.i_b >= policy.h_b && events.len() < cfg.max_impulses {
            let post = reset(state, policy);
            segments.push(degenerate_segment(t, state));
            events.push(ImpulseEvent {
                t,
                pre: state,
                post,
                index: events.len(),
                grazing: false,
            });
            state = post;
        }
    }

    let field = full_field(*params);
    let end = loop {
        if events.len() >= cfg.max_impulses && policy.is_some() {
            break SimulationEnd::MaxImpulses;
        }
        let seg = flow(&field, state, t, cfg.t_max, policy.map(|p| p.h_b), cfg)?;
        let termination = seg.terminated_by;
        let pre = seg.end_state();
        t = seg.t_end;
        segments.push(seg);
        match (termination, policy) {
            (Termination::Impulse, Some(policy)) => {
                let post = reset(pre, policy);
                let rate = field(t, &pre.to_array())[2];
                events.push(ImpulseEvent {
                    t,
                    pre,
                    post,
                    index: events.len(),
                    grazing: is_grazing(rate, policy, params),
                });
                state = post;
            }
            (Termination::Converged, _) => break SimulationEnd::Converged,
            _ => break SimulationEnd::TMax,
        }
    };
    Ok(Trajectory {
        segments,
        events,
        initial: s0,
        params: *params,
        policy: policy.copied(),
        end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equilibria;

    fn fig3() -> Parameters {
        Parameters {
            mu_m: 0.537,
            k_m: 1000.0,
            delta_m: 0.035,
            mu_b: 0.01,
            c: 0.09,
            beta_bm: 0.8,
            n_b: 400.0,
        }
    }

    fn fig6() -> (Parameters, ControlPolicy) {
        (
            Parameters {
                mu_m: 0.357,
                ..fig3()
            },
            ControlPolicy::new(0.15, 0.45, 250.0).unwrap(),
        )
    }

    #[test]
    fn logistic_fixed_points() {
        let params = fig3();
        let m_star = equilibria(&params).endemic.unwrap().m;
        for t in [0.0, 1.0, 100.0, 1e4] {
            assert!((logistic_closed_form(m_star, t, &params) - m_star).abs() < 1e-9 * m_star);
            assert_eq!(logistic_closed_form(0.0, t, &params), 0.0);
        }
    }

    #[test]
    fn logistic_decay_and_degenerate_rate() {
        let decaying = Parameters {
            mu_m: 0.03,
            delta_m: 0.05,
            ..fig3()
        };
        let m = logistic_closed_form(100.0, 50.0, &decaying);
        assert!(m < 100.0 * (-0.02f64 * 50.0).exp());
        let flat = Parameters {
            mu_m: 0.05,
            delta_m: 0.05,
            ..fig3()
        };
        let expect = 100.0 / (1.0 + 0.05 / 1000.0 * 100.0 * 20.0);
        assert!((logistic_closed_form(100.0, 20.0, &flat) - expect).abs() < 1e-12);
    }

    #[test]
    fn impulse_arithmetic() {
        let policy = ControlPolicy::new(0.15, 0.45, 250.0).unwrap();
        let s = apply_impulse(State::new(100.0, 250.0), &policy);
        assert!((s.m - 85.0).abs() < 1e-12);
        assert!((s.i_b - 137.5).abs() < 1e-12);
        let identity = ControlPolicy {
            p: 0.0,
            q: 0.0,
            h_b: 250.0,
        };
        assert_eq!(
            apply_impulse(State::new(3.0, 4.0), &identity),
            State::new(3.0, 4.0)
        );
        let heavy = ControlPolicy::new(0.8, 0.3, 250.0).unwrap();
        assert!((apply_impulse(State::new(934.823, 250.0), &heavy).m - 186.9646).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_segment_is_constant() {
        let params = fig3();
        let e = equilibria(&params).endemic.unwrap();
        let seg = integrate_segment(e, &params, None, 100.0, &SimConfig::default()).unwrap();
        assert_eq!(seg.terminated_by, Termination::TMax);
        for (_, s) in &seg.samples {
            assert!((s.m - e.m).abs() < 1e-9 * e.m);
            assert!((s.i_b - e.i_b).abs() < 1e-9 * e.i_b);
        }
    }

    #[test]
    fn fig6_segment_hits_guard_from_below() {
        let (params, policy) = fig6();
        let cfg = SimConfig::default();
        let seg = integrate_segment(
            State::new(771.0, 137.0),
            &params,
            Some(&policy),
            cfg.t_max,
            &cfg,
        )
        .unwrap();
        assert_eq!(seg.terminated_by, Termination::Impulse);
        let end = seg.end_state();
        assert!((end.i_b - 250.0).abs() <= 1e-10 * 250.0);
        assert!(vector_field(end, &params).dib_dt > 0.0);
        for (_, s) in &seg.samples[..seg.samples.len() - 1] {
            assert!(s.i_b < 250.0);
        }
    }

    #[test]
    fn unreachable_guard_runs_to_t_max() {
        let (params, _) = fig6();
        let e = equilibria(&params).endemic.unwrap();
        let policy = ControlPolicy::new(0.15, 0.45, 0.5 * (e.i_b + params.n_b)).unwrap();
        let cfg = SimConfig::default();
        let seg = integrate_segment(
            State::new(50.0, 10.0),
            &params,
            Some(&policy),
            cfg.t_max,
            &cfg,
        )
        .unwrap();
        assert_eq!(seg.terminated_by, Termination::TMax);
        assert_eq!(seg.t_end, cfg.t_max);
    }

    #[test]
    fn segment_rejects_start_above_guard() {
        let (params, policy) = fig6();
        let err = integrate_segment(
            State::new(10.0, 260.0),
            &params,
            Some(&policy),
            10.0,
            &SimConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn start_above_guard_resets_first() {
        let (params, policy) = fig6();
        let cfg = SimConfig {
            t_max: 50.0,
            ..SimConfig::default()
        };
        let traj = simulate(State::new(500.0, 300.0), &params, Some(&policy), &cfg).unwrap();
        let first = traj.events[0];
        assert_eq!(first.t, 0.0);
        assert_eq!(first.post, apply_impulse(State::new(500.0, 300.0), &policy));
        assert_eq!(traj.segments[0].duration(), 0.0);
        assert_eq!(traj.segments[1].start_state(), first.post);
    }

    #[test]
    fn mosquito_free_axis_stays_free() {
        let (params, policy) = fig6();
        let cfg = SimConfig {
            t_max: 500.0,
            ..SimConfig::default()
        };
        let traj = simulate(State::new(0.0, 200.0), &params, Some(&policy), &cfg).unwrap();
        assert!(traj.events.is_empty());
        assert!(traj.samples().all(|(_, s)| s.m == 0.0));
        assert!(traj.final_state().i_b < 200.0 * (-0.01f64 * 499.0).exp());
    }

    #[test]
    fn impulse_cap_ends_run() {
        let (params, policy) = fig6();
        let cfg = SimConfig {
            max_impulses: 3,
            ..SimConfig::default()
        };
        let traj = simulate(State::new(771.0, 137.0), &params, Some(&policy), &cfg).unwrap();
        assert_eq!(traj.end, SimulationEnd::MaxImpulses);
        assert_eq!(traj.events.len(), 3);
        assert_eq!(traj.segments.len(), 3);
    }

    #[test]
    fn csv_layout() {
        let (params, policy) = fig6();
        let cfg = SimConfig {
            t_max: 60.0,
            ..SimConfig::default()
        };
        let traj = simulate(State::new(771.0, 137.0), &params, Some(&policy), &cfg).unwrap();
        assert!(!traj.events.is_empty());
        let csv = traj.to_csv(1.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,M,I_b,event"));
        let rows: Vec<Vec<&str>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect())
            .collect();
        assert!(rows.iter().all(|r| r.len() == 4));
        let pre = rows.iter().filter(|r| r[3] == "impulse_pre").count();
        let post = rows.iter().filter(|r| r[3] == "impulse_post").count();
        assert_eq!(pre, traj.events.len());
        assert_eq!(post, traj.events.len());
        for w in rows.windows(2) {
            let (a, b): (f64, f64) = (w[0][0].parse().unwrap(), w[1][0].parse().unwrap());
            assert!(b >= a);
            if w[0][3] == "impulse_pre" {
                assert_eq!(w[1][3], "impulse_post");
                assert_eq!(a, b);
            }
        }
        assert!(csv.ends_with('\n'));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn full_model_requires_conserved_total() {
        let (params, policy) = fig6();
        let bad = FullState3D::new(100.0, 200.0, 100.0);
        assert!(simulate_full_3d(bad, &params, Some(&policy), &SimConfig::default()).is_err());
    }

    #[test]
    fn full_model_infection_needs_vectors() {
        let params = fig3();
        let cfg = SimConfig {
            t_max: 10.0,
            ..SimConfig::default()
        };
        let with =
            simulate_full_3d(FullState3D::new(10.0, 400.0, 0.0), &params, None, &cfg).unwrap();
        assert!(with.final_state().i_b > 0.0);
        let without =
            simulate_full_3d(FullState3D::new(0.0, 400.0, 0.0), &params, None, &cfg).unwrap();
        assert_eq!(without.final_state().i_b, 0.0);
    }
}
