use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{key} = {value} is outside its domain {constraint}")]
    OutOfDomain {
        key: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("threshold H_b = {h_b} must be below the bird population N_b = {n_b}")]
    ThresholdAboveHosts { h_b: f64, n_b: f64 },
    #[error("invalid state: {reason}")]
    InvalidState { reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}: h = {h}, state = {state:?}")]
    StepSizeUnderflow { t: f64, h: f64, state: Vec<f64> },
    #[error("step limit {max_steps} exceeded at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },
    #[error("initial data: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("no endemic equilibrium (mu_m <= delta_m); mosquitoes die out")]
    NoEndemic,
    #[error("threshold H_b = {h_b} is not below I_b* = {i_b_star}; the guard is never reached")]
    Unreachable { h_b: f64, i_b_star: f64 },
    #[error("flight from M = {x} never reached the guard within {t_max} days")]
    NoHit { x: f64, t_max: f64 },
    #[error("return map sign conditions failed: g({lo}) = {g_lo}, g({hi}) = {g_hi}")]
    NoBracket {
        lo: f64,
        g_lo: f64,
        hi: f64,
        g_hi: f64,
    },
    #[error("kappa denominator {denominator} is numerically zero (grazing hit)")]
    SingularKappa { denominator: f64 },
    #[error("orbit of order {0} is not supported")]
    UnsupportedOrder(usize),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
