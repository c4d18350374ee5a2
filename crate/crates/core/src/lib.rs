//! Positivity certificates, the segment map and omega-limit sweeps for the
//! two-delay population equation
//! `u' = -gamma u + f(u(t - tau0)) - f(u(t - tau)) exp(-gamma (tau - tau0))`.

pub mod counterexample;
pub mod d0;
pub mod error;
pub mod functional;
pub mod integrator;
pub mod model;
pub mod quadrature;
pub mod segment;
pub mod sweep;

pub use counterexample::{
    limit_u0, make_fdelta, run_counterexample, run_counterexample_on, CounterexampleRun,
    CounterexampleSpec,
};
pub use d0::{AgeDistribution, RandomGShape};
pub use error::{Error, Result};
pub use functional::{Membership, Model, D0_TOLERANCE};
pub use integrator::{self_convergence, ConvergenceReport, SchemeOrder};
pub use model::{Grid, Nonlinearity, Parameters};
pub use segment::{HistorySegment, Sample, Slopes, Trajectory};
pub use sweep::{
    classify_limit_set, n_omega_sweep, n_omega_sweep_with_workers, omega_limit, AlphaSummary,
    Family, LimitSetLabel, SeedRun, SweepConfig, SweepResult,
};
