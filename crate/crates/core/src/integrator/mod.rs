//! Method-of-steps integration of the Cauchy problem, zero detection and
//! conjugate-point scans.

pub mod engine;
mod fde;
mod trajectory;

pub use fde::{
    identity, interval_oscillatory, solve_cauchy, solve_ode_interval, ConjugatePair, DelayTerm, EquationSpec,
    HistorySpec, IntervalOscillation, SolveError, SolveOptions, DEFAULT_SCAN_POINTS,
};
pub(crate) use fde::{conjugate_scan, propagate_breakpoints, sample_grid};
pub use trajectory::{detect_zeros, PhiFn, Trajectory, Zero, ZeroKind, ZeroReport};
pub(crate) use trajectory::{ExpRepr, Repr};
