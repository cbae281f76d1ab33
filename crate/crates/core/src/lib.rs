//! Numerical laboratory for second-order linear functional-differential
//! equations
//!
//! ```text
//! (p(t) φ'(t))' + q(t) φ'(t) + Σ_j r_j(t) φ(α_j(t)) = f(t),   α_j(t) <= t.
//! ```
//!
//! * [`expr`] parses and evaluates coefficient functions.
//! * [`integrator`] solves Cauchy problems by the method of steps and
//!   detects zeros.
//! * [`riccati`] implements the Riccati transform `y = p φ'/φ` with delayed
//!   integral terms, blow-up detection and numerical comparison checks.
//! * [`criteria`] checks oscillation and non-oscillation criteria and
//!   produces [`criteria::CriterionReport`]s.

pub mod expr;
pub mod integrator;
pub mod riccati;
pub mod criteria;
pub mod verdict;

pub use verdict::OscillationVerdict;
