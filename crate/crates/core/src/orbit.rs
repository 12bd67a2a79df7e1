//! Return map on the phase set and the periodic orbits it generates.
//!
//! A point `x` on the phase line `I_b = (1-q) H_b` is flowed until it hits the
//! guard `I_b = H_b` at mosquito level `M_hit`; the reset then lands on
//! `F(x) = (1-p) M_hit`. Fixed points of `F` are order-1 orbits, fixed points
//! of `F∘F` that are not fixed by `F` are order-2 orbits.

use rayon::prelude::*;

use crate::error::OrbitError;
use crate::integrator::{integrate_segment_from, Segment, SimConfig, Termination};
use crate::model::{equilibria, ControlPolicy, Parameters, State};

/// Tolerances and search settings. Lengths ending in `_rel` scale with `K_m`
/// unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub sim: SimConfig,
    /// Fixed-point tolerance on `|F^k(x) - x|`.
    pub fixed_point_tol_rel: f64,
    /// Left end of the bracketing interval.
    pub bracket_lo_rel: f64,
    /// Number of geometric grid points for the order-2 scan.
    pub order2_grid: usize,
    /// Central-difference step relative to the anchor itself.
    pub fd_step_rel: f64,
    /// Relative tolerance of the adaptive quadrature.
    pub quad_rel_tol: f64,
    /// Tail tolerance for classifying map iterates as a 1- or 2-cycle.
    pub cycle_tol_rel: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            fixed_point_tol_rel: 1e-9,
            bracket_lo_rel: 1e-6,
            order2_grid: 512,
            fd_step_rel: 1e-5,
            quad_rel_tol: 1e-8,
            cycle_tol_rel: 1e-6,
        }
    }
}

/// One application of the return map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareSample {
    pub x_in: f64,
    /// Next post-impulse mosquito level, absent on NoHit.
    pub x_out: Option<f64>,
    /// Mosquito level at the guard before the reset.
    pub m_at_guard: Option<f64>,
    /// Flight time to the guard, or the exhausted budget on NoHit.
    pub hit_time: f64,
}

impl PoincareSample {
    pub fn hit(&self) -> bool {
        self.x_out.is_some()
    }
}

/// Flow from `(x, (1-q) H_b)` starting at time `t0`.
fn flight(
    x: f64,
    t0: f64,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<Segment, OrbitError> {
    let s0 = State::new(x, policy.phase_level());
    Ok(integrate_segment_from(
        t0,
        s0,
        params,
        Some(policy),
        t0 + opts.sim.t_max,
        &opts.sim,
    )?)
}

pub fn poincare_map(
    x: f64,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<PoincareSample, OrbitError> {
    let seg = flight(x, 0.0, params, policy, opts)?;
    let (x_out, m_at_guard) = match seg.terminated_by {
        Termination::Impulse => {
            let m = seg.end_state().m;
            (Some((1.0 - policy.p) * m), Some(m))
        }
        _ => (None, None),
    };
    Ok(PoincareSample {
        x_in: x,
        x_out,
        m_at_guard,
        hit_time: seg.duration(),
    })
}

fn map_value(
    x: f64,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<f64, OrbitError> {
    let sample = poincare_map(x, params, policy, opts)?;
    sample.x_out.ok_or(OrbitError::NoHit {
        x,
        t_max: opts.sim.t_max,
    })
}

fn map_iterate(
    x: f64,
    k: usize,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<f64, OrbitError> {
    (0..k).try_fold(x, |x, _| map_value(x, params, policy, opts))
}

/// A closed orbit through `order` impulses.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub order: usize,
    /// Post-impulse mosquito levels on the phase set, in visiting order.
    pub anchors: Vec<f64>,
    /// Sum of the flight times.
    pub period: f64,
    /// One flight per anchor with dense output, laid end to end starting at `t = 0`.
    pub flights: Vec<Segment>,
}

impl PeriodicOrbit {
    /// Mosquito levels at the guard, one per flight.
    pub fn pre_impulse_m(&self) -> Vec<f64> {
        self.flights.iter().map(|f| f.end_state().m).collect()
    }

    /// Mesh samples over one period.
    pub fn orbit_samples(&self) -> Vec<(f64, State)> {
        self.flights
            .iter()
            .flat_map(|f| f.samples.iter().copied())
            .collect()
    }

    /// Returns `|F^k(anchor) - anchor|` recomputed from the stored flights.
    pub fn closure_gap(&self, policy: &ControlPolicy) -> f64 {
        let last = self
            .flights
            .last()
            .map(|f| f.end_state().m)
            .unwrap_or(f64::NAN);
        ((1.0 - policy.p) * last - self.anchors[0]).abs()
    }
}

/// Flows through `order` consecutive impulses starting at `anchor`.
pub fn build_orbit(
    anchor: f64,
    order: usize,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    let mut anchors = Vec::with_capacity(order);
    let mut flights = Vec::with_capacity(order);
    let mut x = anchor;
    let mut t = 0.0;
    for _ in 0..order {
        let seg = flight(x, t, params, policy, opts)?;
        if seg.terminated_by != Termination::Impulse {
            return Err(OrbitError::NoHit {
                x,
                t_max: opts.sim.t_max,
            });
        }
        anchors.push(x);
        t = seg.t_end;
        x = (1.0 - policy.p) * seg.end_state().m;
        flights.push(seg);
    }
    Ok(PeriodicOrbit {
        order,
        anchors,
        period: t,
        flights,
    })
}

/// Orbital stability data for a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Product of the jump factors, one per impulse.
    pub kappa1: f64,
    /// `-∫ [(mu_m/K_m) M + mu_b + (c beta_bm / N_b) M] dt` over one period.
    pub integral_term: f64,
    pub mu_analytic: f64,
    /// Central-difference slope of `F^k` at the first anchor.
    pub mu_numeric: f64,
    /// `|k ln(1/(1-p)) - ∫ (mu_m - delta_m - (mu_m/K_m) M) dt|`.
    pub identity_residual: f64,
    pub stable: bool,
}

impl StabilityReport {
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("kappa1", self.kappa1.to_string()),
            ("integral_term", self.integral_term.to_string()),
            ("mu_analytic", self.mu_analytic.to_string()),
            ("mu_numeric", self.mu_numeric.to_string()),
            ("identity_residual", self.identity_residual.to_string()),
            ("stable", self.stable.to_string()),
        ]
    }
}

/// Jump factor of one impulse, evaluated at the pre-impulse level `m_pre` on the guard.
///
/// Equals `Q(post) / Q(pre)` with the post state `((1-p) m_pre, (1-q) H_b)`;
/// the leading `(1-p)` of the full saltation factor cancels against the
/// logarithmic growth of `M` along the flight.
pub fn kappa1(params: &Parameters, policy: &ControlPolicy, m_pre: f64) -> Result<f64, OrbitError> {
    let beta = params.infection_rate();
    let (n_b, h_b) = (params.n_b, policy.h_b);
    let numerator = beta * (n_b - policy.phase_level()) * (1.0 - policy.p) * m_pre
        - params.mu_b * policy.phase_level() * n_b;
    let denominator = beta * (n_b - h_b) * m_pre - params.mu_b * h_b * n_b;
    let scale = beta * (n_b - h_b) * m_pre + params.mu_b * h_b * n_b;
    if denominator.abs() <= 1e-12 * scale {
        return Err(OrbitError::SingularKappa { denominator });
    }
    Ok(numerator / denominator)
}

/// Composite adaptive Simpson of `∫ M dt` over the dense output of one flight.
fn integrate_m(seg: &Segment, rel_tol: f64) -> f64 {
    seg.dense
        .iter()
        .map(|step| {
            let (a, b) = (step.t0, step.t_end);
            let f = |t: f64| step.eval(t)[0];
            let fa = f(a);
            let fb = f(b);
            let fm = f(0.5 * (a + b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
            simpson(&f, a, b, fa, fm, fb, whole, tol, 30)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Floquet multiplier of a periodic orbit from the jump factors and the
/// divergence integral, cross-checked against the slope of the return map.
///
/// The jump factor uses the pre-impulse guard point `(M_hit, H_b)` for the
/// unsigned quantities and the post-impulse point for the `+` quantities.
pub fn floquet_multiplier(
    orbit: &PeriodicOrbit,
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<StabilityReport, OrbitError> {
    if !(1..=2).contains(&orbit.order) {
        return Err(OrbitError::UnsupportedOrder(orbit.order));
    }
    let mut kappa = 1.0;
    let mut m_integral = 0.0;
    for flight in &orbit.flights {
        kappa *= kappa1(params, policy, flight.end_state().m)?;
        m_integral += integrate_m(flight, opts.quad_rel_tol);
    }
    let period = orbit.period;
    let a = params.mu_m / params.k_m;
    let integral_term =
        -((a + params.infection_rate() / params.n_b) * m_integral + params.mu_b * period);
    let mu_analytic = kappa * integral_term.exp();

    let growth = params.net_growth() * period - a * m_integral;
    let identity_residual = (orbit.order as f64 * (1.0 / (1.0 - policy.p)).ln() - growth).abs();

    let x = orbit.anchors[0];
    let h = opts.fd_step_rel * x;
    let forward = map_iterate(x + h, orbit.order, params, policy, opts)?;
    let backward = map_iterate(x - h, orbit.order, params, policy, opts)?;
    let mu_numeric = (forward - backward) / (2.0 * h);

    Ok(StabilityReport {
        kappa1: kappa,
        integral_term,
        mu_analytic,
        mu_numeric,
        identity_residual,
        stable: mu_analytic.abs() < 1.0,
    })
}

fn check_regime(params: &Parameters, policy: &ControlPolicy) -> Result<State, OrbitError> {
    params.validate()?;
    policy.validate(params)?;
    let star = equilibria(params).endemic.ok_or(OrbitError::NoEndemic)?;
    if policy.h_b >= star.i_b {
        return Err(OrbitError::Unreachable {
            h_b: policy.h_b,
            i_b_star: star.i_b,
        });
    }
    Ok(star)
}

/// Endpoints of the bracket used by [`find_order1`] with their `g = F(x) - x` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub g_lo: f64,
    pub hi: f64,
    pub g_hi: f64,
}

/// Evaluates `g = F(x) - x` at `bracket_lo_rel * K_m` and at `M*`.
pub fn order1_bracket(
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<Bracket, OrbitError> {
    let star = check_regime(params, policy)?;
    let lo = opts.bracket_lo_rel * params.k_m;
    let hi = star.m;
    let g_lo = map_value(lo, params, policy, opts)? - lo;
    let g_hi = map_value(hi, params, policy, opts)? - hi;
    Ok(Bracket { lo, g_lo, hi, g_hi })
}

/// Locates the order-1 orbit by bracketing `F(x) - x` between a tiny mosquito
/// level (where `F(x) > x`) and `M*` (where `F(x) < x`).
pub fn find_order1(
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<(PeriodicOrbit, StabilityReport), OrbitError> {
    let bracket = order1_bracket(params, policy, opts)?;
    if !(bracket.g_lo > 0.0 && bracket.g_hi < 0.0) {
        return Err(OrbitError::NoBracket {
            lo: bracket.lo,
            g_lo: bracket.g_lo,
            hi: bracket.hi,
            g_hi: bracket.g_hi,
        });
    }
    let tol = opts.fixed_point_tol_rel * params.k_m;
    let g = |x: f64| map_value(x, params, policy, opts).map(|fx| fx - x);
    let root = refine_sign_change(
        &g,
        bracket.lo,
        bracket.g_lo,
        bracket.hi,
        bracket.g_hi,
        tol,
        1e-6 * tol,
    )?;
    let orbit = build_orbit(root, 1, params, policy, opts)?;
    let report = floquet_multiplier(&orbit, params, policy, opts)?;
    Ok((orbit, report))
}

/// Bisection/secant hybrid: Illinois steps while they shrink the bracket fast enough,
/// bisection otherwise. Stops on `|g| <= tol` or bracket width below `width_tol`.
fn refine_sign_change<G>(
    g: &G,
    a: f64,
    ga: f64,
    b: f64,
    gb: f64,
    tol: f64,
    width_tol: f64,
) -> Result<f64, OrbitError>
where
    G: Fn(f64) -> Result<f64, OrbitError>,
{
    let (mut a, mut ga, mut b, mut gb) = (a, ga, b, gb);
    if ga.abs() <= tol {
        return Ok(a);
    }
    if gb.abs() <= tol {
        return Ok(b);
    }
    let mut side = 0i8;
    let mut width = (b - a).abs();
    for _ in 0..200 {
        let secant = (a * gb - b * ga) / (gb - ga);
        let mid = 0.5 * (a + b);
        let lo = a.min(b);
        let hi = a.max(b);
        let x = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            mid
        };
        let gx = g(x)?;
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            gb = gx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        let new_width = (b - a).abs();
        if new_width <= width_tol {
            return Ok(if ga.abs() < gb.abs() { a } else { b });
        }
        // Fall back to a bisection step when the secant stalls.
        if new_width > 0.5 * width {
            let mid = 0.5 * (a + b);
            let gm = g(mid)?;
            if gm.abs() <= tol {
                return Ok(mid);
            }
            if gm.signum() == ga.signum() {
                a = mid;
                ga = gm;
            } else {
                b = mid;
                gb = gm;
            }
            side = 0;
        }
        width = (b - a).abs();
    }
    Ok(if ga.abs() < gb.abs() { a } else { b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleOrder {
    Order1,
    Order2,
    Undetermined,
}

impl CycleOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            CycleOrder::Order1 => "order1",
            CycleOrder::Order2 => "order2",
            CycleOrder::Undetermined => "undetermined",
        }
    }
}

/// Recorded tail of an iteration of the return map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapIteration {
    /// Post-impulse mosquito levels after the transient.
    pub values: Vec<f64>,
    /// Mosquito level at the guard that produced each recorded value.
    pub m_at_guard: Vec<f64>,
    /// Flight time that produced each recorded value.
    pub flight_times: Vec<f64>,
    pub order: CycleOrder,
}

impl MapIteration {
    /// Last recorded value, the best estimate of an order-1 anchor.
    pub fn anchor(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Classifies a tail as a 1-cycle, a 2-cycle or neither.
pub fn classify_tail(values: &[f64], tol: f64) -> CycleOrder {
    if values.len() < 3 {
        return CycleOrder::Undetermined;
    }
    let spread = |lag: usize| {
        values
            .windows(lag + 1)
            .map(|w| (w[lag] - w[0]).abs())
            .fold(0.0, f64::max)
    };
    if spread(1) <= tol {
        CycleOrder::Order1
    } else if spread(2) <= tol {
        CycleOrder::Order2
    } else {
        CycleOrder::Undetermined
    }
}

/// Iterates `F` from `x0`, discards `n_transient` values and classifies the next `n_record`.
pub fn iterate_map(
    x0: f64,
    params: &Parameters,
    policy: &ControlPolicy,
    n_transient: usize,
    n_record: usize,
    opts: &OrbitOptions,
) -> Result<MapIteration, OrbitError> {
    if x0.is_nan() || x0 <= 0.0 {
        return Err(crate::error::ModelError::InvalidState {
            reason: format!("seed M = {x0} must be positive"),
        }
        .into());
    }
    let mut x = x0;
    let mut values = Vec::with_capacity(n_record);
    let mut m_at_guard = Vec::with_capacity(n_record);
    let mut flight_times = Vec::with_capacity(n_record);
    for i in 0..n_transient + n_record {
        let sample = poincare_map(x, params, policy, opts)?;
        let next = sample.x_out.ok_or(OrbitError::NoHit {
            x,
            t_max: opts.sim.t_max,
        })?;
        if i >= n_transient {
            values.push(next);
            m_at_guard.push(sample.m_at_guard.unwrap_or(f64::NAN));
            flight_times.push(sample.hit_time);
        }
        x = next;
    }
    let order = classify_tail(&values, opts.cycle_tol_rel * params.k_m);
    Ok(MapIteration {
        values,
        m_at_guard,
        flight_times,
        order,
    })
}

/// Geometric grid of `n` points over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// Searches `h(x) = F(F(x)) - x` for roots that are not fixed points of `F`.
pub fn find_order2(
    params: &Parameters,
    policy: &ControlPolicy,
    opts: &OrbitOptions,
) -> Result<Option<PeriodicOrbit>, OrbitError> {
    let star = check_regime(params, policy)?;
    let tol = opts.fixed_point_tol_rel * params.k_m;
    let lo = opts.bracket_lo_rel * params.k_m;
    let grid = geometric_grid(lo, star.m, opts.order2_grid.max(2));
    let h = |x: f64| map_iterate(x, 2, params, policy, opts).map(|y| y - x);
    let values = grid
        .par_iter()
        .map(|&x| h(x))
        .collect::<Result<Vec<f64>, OrbitError>>()?;

    let fixed = find_order1(params, policy, opts)
        .ok()
        .map(|(orbit, _)| orbit.anchors[0]);
    let is_order1 = |r: f64| -> Result<bool, OrbitError> {
        if fixed.is_some_and(|x| (r - x).abs() <= 10.0 * tol) {
            return Ok(true);
        }
        Ok((map_value(r, params, policy, opts)? - r).abs() <= 10.0 * tol)
    };

    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (ha, hb) = (values[i], values[i + 1]);
        let root = if ha == 0.0 {
            a
        } else if ha.signum() != hb.signum() && hb != 0.0 {
            refine_sign_change(&h, a, ha, b, hb, 0.0, 0.1 * tol)?
        } else {
            continue;
        };
        if is_order1(root)? {
            continue;
        }
        let partner = map_value(root, params, policy, opts)?;
        if (partner - root).abs() <= 10.0 * tol {
            continue;
        }
        let start = root.min(partner);
        return Ok(Some(build_orbit(start, 2, params, policy, opts)?));
    }
    Ok(None)
}
