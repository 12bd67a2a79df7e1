//! West Nile virus host-vector dynamics under threshold-triggered impulsive control.
//!
//! * [`model`]: parameters, vector field, equilibria, nullcline markers and regimes.
//! * [`integrator`]: adaptive simulation with guard detection and impulse resets.
//! * [`orbit`]: return map on the phase set, periodic orbits and Floquet multipliers.
//! * [`experiment`]: configuration files, figure presets, parameter scans and SVG output.

pub mod dopri;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod model;
pub mod orbit;

pub use error::{IntegrationError, ModelError, OrbitError};
pub use integrator::{
    apply_impulse, integrate_segment, logistic_closed_form, simulate, simulate_full_3d,
    FullState3D, ImpulseEvent, SimConfig, Termination, Trajectory, Trajectory2D, Trajectory3D,
    TrajectorySegment,
};
pub use model::{
    classify_region, dulac_divergence, equilibria, jacobian_eigenvalues, nullcline_markers,
    vector_field, ControlPolicy, EquilibriumSet, Parameters, RegimeReport, Region, State,
};
pub use orbit::{
    find_order1, find_order2, floquet_multiplier, iterate_map, poincare_map, CycleOrder,
    MapIteration, OrbitOptions, PeriodicOrbit, PoincareSample, StabilityReport,
};
