//! Host-vector model: constants, vector field and closed-form analytics.
//!
//! The planar system tracks the mosquito population `M` and the infected
//! bird count `I_b`:
//!
//! ```text
//! dM/dt   = mu_m M (1 - M/K_m) - delta_m M
//! dI_b/dt = c beta_bm (1 - I_b/N_b) M - mu_b I_b
//! ```
//!
//! Everything here is a pure function of its inputs.

use std::fmt;

use crate::error::ModelError;

/// Biological constants of the host-vector model. Units are days and individuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    /// Mosquito per-capita birth rate (1/day).
    pub mu_m: f64,
    /// Mosquito carrying capacity.
    pub k_m: f64,
    /// Mosquito death rate (1/day).
    pub delta_m: f64,
    /// Bird recruitment/death rate (1/day).
    pub mu_b: f64,
    /// Biting rate (1/day).
    pub c: f64,
    /// Mosquito to bird transmission probability.
    pub beta_bm: f64,
    /// Total bird population.
    pub n_b: f64,
}

impl Parameters {
    /// Checks positivity and `beta_bm` in (0, 1]. Empirical field ranges are not enforced.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("mu_m", self.mu_m),
            ("K_m", self.k_m),
            ("delta_m", self.delta_m),
            ("mu_b", self.mu_b),
            ("c", self.c),
            ("beta_bm", self.beta_bm),
            ("N_b", self.n_b),
        ];
        for (key, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::OutOfDomain {
                    key,
                    value,
                    constraint: "finite and > 0",
                });
            }
        }
        if self.beta_bm > 1.0 {
            return Err(ModelError::OutOfDomain {
                key: "beta_bm",
                value: self.beta_bm,
                constraint: "(0, 1]",
            });
        }
        Ok(())
    }

    /// Net mosquito growth rate `mu_m - delta_m`.
    pub fn net_growth(&self) -> f64 {
        self.mu_m - self.delta_m
    }

    /// Effective infection rate `c * beta_bm`.
    pub fn infection_rate(&self) -> f64 {
        self.c * self.beta_bm
    }

    /// Canonical `key=value` lines, one per field.
    pub fn to_key_values(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mu_m", self.mu_m),
            ("K_m", self.k_m),
            ("delta_m", self.delta_m),
            ("mu_b", self.mu_b),
            ("c", self.c),
            ("beta_bm", self.beta_bm),
            ("N_b", self.n_b),
        ]
    }
}

/// Impulse triple: cull fraction `p`, cure fraction `q`, threshold `H_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPolicy {
    pub p: f64,
    pub q: f64,
    pub h_b: f64,
}

impl ControlPolicy {
    pub fn new(p: f64, q: f64, h_b: f64) -> Result<Self, ModelError> {
        let policy = Self { p, q, h_b };
        policy.validate_fractions()?;
        Ok(policy)
    }

    fn validate_fractions(&self) -> Result<(), ModelError> {
        for (key, value) in [("p", self.p), ("q", self.q)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ModelError::OutOfDomain {
                    key,
                    value,
                    constraint: "(0, 1)",
                });
            }
        }
        if !(self.h_b.is_finite() && self.h_b > 0.0) {
            return Err(ModelError::OutOfDomain {
                key: "H_b",
                value: self.h_b,
                constraint: "finite and > 0",
            });
        }
        Ok(())
    }

    /// Full validation, including `H_b < N_b` for the paired parameters.
    pub fn validate(&self, params: &Parameters) -> Result<(), ModelError> {
        self.validate_fractions()?;
        if self.h_b >= params.n_b {
            return Err(ModelError::ThresholdAboveHosts {
                h_b: self.h_b,
                n_b: params.n_b,
            });
        }
        Ok(())
    }

    /// Infected-bird level on the phase set, `(1 - q) H_b`.
    pub fn phase_level(&self) -> f64 {
        (1.0 - self.q) * self.h_b
    }

    pub fn to_key_values(&self) -> Vec<(&'static str, f64)> {
        vec![("p", self.p), ("q", self.q), ("H_b", self.h_b)]
    }
}

/// Planar state `(M, I_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub m: f64,
    pub i_b: f64,
}

impl State {
    pub const fn new(m: f64, i_b: f64) -> Self {
        Self { m, i_b }
    }

    pub fn validate(&self, params: &Parameters) -> Result<(), ModelError> {
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(ModelError::InvalidState {
                reason: format!("M = {} must be finite and nonnegative", self.m),
            });
        }
        if !(self.i_b >= 0.0 && self.i_b <= params.n_b) {
            return Err(ModelError::InvalidState {
                reason: format!("I_b = {} must lie in [0, N_b = {}]", self.i_b, params.n_b),
            });
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.m, self.i_b]
    }

    pub fn from_array(y: [f64; 2]) -> Self {
        Self { m: y[0], i_b: y[1] }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(M = {}, I_b = {})", self.m, self.i_b)
    }
}

/// Time derivative of a planar state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub dm_dt: f64,
    pub dib_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    /// Always the origin.
    pub disease_free: State,
    /// Present iff `mu_m > delta_m`.
    pub endemic: Option<State>,
}

impl EquilibriumSet {
    pub fn endemic_exists(&self) -> bool {
        self.endemic.is_some()
    }
}

/// Nullcline markers on the guard and phase lines plus the regime flags derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub m_star: f64,
    pub i_b_star: f64,
    /// `M` where the `I_b` nullcline crosses the phase line `I_b = (1-q) H_b`.
    pub n_mq: f64,
    /// `M` where the `I_b` nullcline crosses the guard line `I_b = H_b`.
    pub n_mh: f64,
    /// `(1-p) M* < N_mq`.
    pub case_a: bool,
    /// `(1-p) N_mh > N_mq`.
    pub case_b: bool,
    /// `H_b < I_b*`.
    pub threshold_reachable: bool,
}

impl RegimeReport {
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("M_star", self.m_star.to_string()),
            ("I_b_star", self.i_b_star.to_string()),
            ("N_mq", self.n_mq.to_string()),
            ("N_mh", self.n_mh.to_string()),
            ("case_a", self.case_a.to_string()),
            ("case_b", self.case_b.to_string()),
            ("threshold_reachable", self.threshold_reachable.to_string()),
        ]
    }
}

/// One of the four open sign regions of the positive quadrant, or the nullcline set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `dM/dt > 0`, `dI_b/dt < 0`.
    Omega1,
    /// `dM/dt > 0`, `dI_b/dt > 0`.
    Omega2,
    /// `dM/dt < 0`, `dI_b/dt > 0`.
    Omega3,
    /// `dM/dt < 0`, `dI_b/dt < 0`.
    Omega4,
    Boundary,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Omega1 => "Omega1",
            Region::Omega2 => "Omega2",
            Region::Omega3 => "Omega3",
            Region::Omega4 => "Omega4",
            Region::Boundary => "boundary",
        };
        f.write_str(name)
    }
}

pub fn vector_field(s: State, params: &Parameters) -> Rates {
    let dm_dt = params.mu_m * s.m * (1.0 - s.m / params.k_m) - params.delta_m * s.m;
    let dib_dt = params.infection_rate() * (1.0 - s.i_b / params.n_b) * s.m - params.mu_b * s.i_b;
    Rates { dm_dt, dib_dt }
}

/// Divergence of the field scaled by the Dulac function `1/M`. Constant and negative.
pub fn dulac_divergence(params: &Parameters) -> f64 {
    -params.mu_m / params.k_m - params.infection_rate() / params.n_b - params.mu_b
}

pub fn equilibria(params: &Parameters) -> EquilibriumSet {
    let r = params.net_growth();
    let endemic = (r > 0.0).then(|| {
        let m_star = params.k_m * r / params.mu_m;
        let beta = params.infection_rate();
        let i_b_star = beta * params.k_m * params.n_b * r
            / (beta * params.k_m * r + params.mu_m * params.mu_b * params.n_b);
        State::new(m_star, i_b_star)
    });
    EquilibriumSet {
        disease_free: State::new(0.0, 0.0),
        endemic,
    }
}

/// Eigenvalues of the (lower-triangular) Jacobian at `s`: `(dP/dM, dQ/dI_b)`.
pub fn jacobian_eigenvalues(params: &Parameters, s: State) -> (f64, f64) {
    let lambda1 = params.net_growth() - 2.0 * params.mu_m * s.m / params.k_m;
    let lambda2 = -params.infection_rate() * s.m / params.n_b - params.mu_b;
    (lambda1, lambda2)
}

/// `M` on the `I_b` nullcline at infected level `level` (`level < N_b`).
pub fn ib_nullcline_m(params: &Parameters, level: f64) -> f64 {
    params.mu_b * params.n_b * level / (params.infection_rate() * (params.n_b - level))
}

/// `I_b` on the `I_b` nullcline at mosquito level `m`.
pub fn ib_nullcline_ib(params: &Parameters, m: f64) -> f64 {
    let beta = params.infection_rate();
    beta * params.n_b * m / (beta * m + params.mu_b * params.n_b)
}

pub fn nullcline_markers(
    params: &Parameters,
    policy: &ControlPolicy,
) -> Result<RegimeReport, ModelError> {
    if policy.h_b >= params.n_b {
        return Err(ModelError::ThresholdAboveHosts {
            h_b: policy.h_b,
            n_b: params.n_b,
        });
    }
    let n_mq = ib_nullcline_m(params, policy.phase_level());
    let n_mh = ib_nullcline_m(params, policy.h_b);
    // Without an endemic point the mosquito population collapses to zero.
    let star = equilibria(params).endemic.unwrap_or_default();
    Ok(RegimeReport {
        m_star: star.m,
        i_b_star: star.i_b,
        n_mq,
        n_mh,
        case_a: (1.0 - policy.p) * star.m < n_mq,
        case_b: (1.0 - policy.p) * n_mh > n_mq,
        threshold_reachable: policy.h_b < star.i_b,
    })
}

const REGION_ZERO_TOL: f64 = 1e-12;

pub fn classify_region(s: State, params: &Parameters) -> Region {
    let rates = vector_field(s, params);
    let m_tol = REGION_ZERO_TOL * params.mu_m * params.k_m;
    let ib_tol = REGION_ZERO_TOL * params.infection_rate() * params.k_m;
    let dm = sign_with_tol(rates.dm_dt, m_tol);
    let dib = sign_with_tol(rates.dib_dt, ib_tol);
    match (dm, dib) {
        (1, -1) => Region::Omega1,
        (1, 1) => Region::Omega2,
        (-1, 1) => Region::Omega3,
        (-1, -1) => Region::Omega4,
        _ => Region::Boundary,
    }
}

fn sign_with_tol(value: f64, tol: f64) -> i8 {
    if value > tol {
        1
    } else if value < -tol {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig3() -> Parameters {
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

    fn small() -> Parameters {
        Parameters {
            mu_m: 0.06,
            delta_m: 0.04,
            ..fig3()
        }
    }

    #[test]
    fn origin_is_fixed() {
        let r = vector_field(State::new(0.0, 0.0), &fig3());
        assert_eq!((r.dm_dt, r.dib_dt), (0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic_field() {
        let r = vector_field(State::new(100.0, 50.0), &small());
        assert!((r.dm_dt - 1.4).abs() < 1e-12);
        assert!((r.dib_dt - 5.8).abs() < 1e-12);
    }

    #[test]
    fn fig3_endemic_point() {
        let params = fig3();
        let e = equilibria(&params).endemic.unwrap();
        assert!((e.m - 934.823).abs() < 1e-3, "{}", e.m);
        assert!((e.i_b - 377.56).abs() < 1e-2, "{}", e.i_b);
        let r = vector_field(e, &params);
        let scale = params.mu_m * params.k_m;
        assert!(r.dm_dt.abs() <= 1e-9 * scale);
        assert!(r.dib_dt.abs() <= 1e-9 * scale);
    }

    #[test]
    fn small_endemic_point() {
        let e = equilibria(&small()).endemic.unwrap();
        assert!((e.m - 1000.0 / 3.0).abs() < 1e-9);
        assert!((e.i_b - 2400.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn no_endemic_when_mosquitoes_die_out() {
        let params = Parameters {
            mu_m: 0.03,
            delta_m: 0.05,
            ..fig3()
        };
        assert!(!equilibria(&params).endemic_exists());
        let params = Parameters {
            mu_m: 0.05,
            delta_m: 0.05,
            ..fig3()
        };
        assert!(!equilibria(&params).endemic_exists());
    }

    #[test]
    fn dulac_value() {
        let d = dulac_divergence(&fig3());
        assert!((d - (-0.537 / 1000.0 - 0.072 / 400.0 - 0.01)).abs() < 1e-15);
        assert!((d + 0.010717).abs() < 1e-12);
        let tiny = Parameters {
            mu_m: 1e-300,
            ..fig3()
        };
        assert!((dulac_divergence(&tiny) - (-0.072 / 400.0 - 0.01)).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_origin_and_endemic() {
        let params = fig3();
        let (l1, l2) = jacobian_eigenvalues(&params, State::default());
        assert_eq!(l1, params.mu_m - params.delta_m);
        assert_eq!(l2, -params.mu_b);
        let e = equilibria(&params).endemic.unwrap();
        let (l1, l2) = jacobian_eigenvalues(&params, e);
        assert!(l1 < 0.0 && l2 < 0.0);
        let degenerate = Parameters {
            mu_m: 0.05,
            delta_m: 0.05,
            ..params
        };
        assert_eq!(
            jacobian_eigenvalues(&degenerate, State::default()),
            (0.0, -params.mu_b)
        );
    }

    #[test]
    fn markers_fig6() {
        let params = Parameters {
            mu_m: 0.357,
            ..fig3()
        };
        let policy = ControlPolicy::new(0.15, 0.45, 250.0).unwrap();
        let r = nullcline_markers(&params, &policy).unwrap();
        assert!((r.n_mq - 29.10).abs() < 5e-3, "{}", r.n_mq);
        assert!((r.n_mh - 92.59).abs() < 5e-3, "{}", r.n_mh);
        assert!(((1.0 - 0.15) * r.n_mh - 78.70).abs() < 5e-3);
        assert!(r.case_b);
        assert!(r.threshold_reachable);
    }

    #[test]
    fn markers_fig5() {
        let params = Parameters {
            mu_m: 0.06,
            delta_m: 0.05,
            ..fig3()
        };
        let policy = ControlPolicy::new(0.8, 0.25, 250.0).unwrap();
        let r = nullcline_markers(&params, &policy).unwrap();
        assert!((r.m_star - 166.67).abs() < 5e-3);
        assert!(((1.0 - 0.8) * r.m_star - 33.33).abs() < 5e-3);
        assert!((r.n_mq - 49.02).abs() < 5e-3, "{}", r.n_mq);
        assert!(r.case_a);
    }

    #[test]
    fn markers_cure_limit() {
        let params = fig3();
        let policy = ControlPolicy::new(0.5, 1.0 - 1e-12, 250.0).unwrap();
        let r = nullcline_markers(&params, &policy).unwrap();
        assert!(r.n_mq < 1e-9);
        assert!(!r.case_a);
    }

    #[test]
    fn markers_reject_threshold_above_hosts() {
        let policy = ControlPolicy {
            p: 0.1,
            q: 0.1,
            h_b: 400.0,
        };
        assert!(matches!(
            nullcline_markers(&fig3(), &policy),
            Err(ModelError::ThresholdAboveHosts { .. })
        ));
    }

    #[test]
    fn regions() {
        let params = fig3();
        let e = equilibria(&params).endemic.unwrap();
        assert_eq!(classify_region(e, &params), Region::Boundary);
        // dI_b at (100, 300) = 0.072 * 0.25 * 100 - 3 = -1.2.
        assert_eq!(
            classify_region(State::new(100.0, 300.0), &params),
            Region::Omega1
        );
        assert_eq!(
            classify_region(State::new(100.0, 10.0), &params),
            Region::Omega2
        );
        assert_eq!(
            classify_region(State::new(e.m + 1.0, e.i_b + 1.0), &params),
            Region::Omega4
        );
    }

    #[test]
    fn validation() {
        let mut params = fig3();
        assert!(params.validate().is_ok());
        params.beta_bm = 1.2;
        assert!(params.validate().is_err());
        params.beta_bm = 0.8;
        params.k_m = -1.0;
        assert!(params.validate().is_err());
        assert!(ControlPolicy::new(1.3, 0.5, 10.0).is_err());
        assert!(ControlPolicy::new(0.3, 0.0, 10.0).is_err());
        assert!(State::new(-1.0, 0.0).validate(&fig3()).is_err());
        assert!(State::new(1.0, 401.0).validate(&fig3()).is_err());
    }
}
