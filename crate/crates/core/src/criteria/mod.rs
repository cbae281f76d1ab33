//! Mechanical checks of comparison-type oscillation and non-oscillation
//! criteria. Every check returns a [`CriterionReport`] listing each
//! hypothesis with its status and the worst grid point seen.
//!
//! Hypotheses quantified over all `t >= t0` are checked on a finite window
//! with step [`crate::expr::DEFAULT_GRID_STEP`] and slack [`SIGN_SLACK`]; reports say so
//! in their caveats.

mod crosscheck;
mod interval;
mod nonosc;
mod osc;
mod report;
mod wong;

use thiserror::Error;

use crate::expr::{EvalError, PiecewiseFn, QuadError, ScalarFn, SIGN_SLACK};
use crate::integrator::{sample_grid, SolveError};
use crate::riccati::RiccatiError;

pub use crosscheck::{random_histories, zero_count_table, CrossCheck};
pub use interval::{build_comparison_coefficient, check_interval_osc_thm22, ComparisonCoefficient, IntervalOscInstance, IntervalOscOptions};
pub use nonosc::{check_nonoscillation_cor31, check_nonoscillation_thm31, find_zero_free, default_histories, NonoscOptions, NonoscWitness};
pub use osc::{check_oscillation_cor32, check_oscillation_thm32, IntervalStrategy, OscOptions};
pub use report::{CriterionReport, Hypothesis, HypothesisStatus, OmegaSets, Witness, ZeroCountRow, ZeroCountTable};
pub use wong::{q_functional, wong_test, TrialFamily, WongInstance, WongOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("expected {expected} comparison coefficients, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("window [{a}, {b}] is empty or not finite")]
    InvalidWindow { a: f64, b: f64 },
    #[error("partition must satisfy t1 < t2 <= t3 < t4, got {0:?}")]
    InvalidPartition([f64; 4]),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("coefficient r_{term} is negative at t = {t} ({value})")]
    NegativeCoefficient { term: usize, t: f64, value: f64 },
    #[error("no term has a deviating argument admissible on [t1, t2]")]
    EmptyFirstSets,
    #[error("no term is retarded on [t3, t4]")]
    EmptySecondSet,
    #[error("no sign pattern of the forcing term found in [{a}, {b}]")]
    NoSignPattern { a: f64, b: f64 },
    #[error("interval [{a}, {b}] is shorter than the grid step")]
    DegenerateInterval { a: f64, b: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub(crate) fn check_window(window: (f64, f64)) -> Result<(), CriteriaError> {
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(CriteriaError::InvalidWindow { a, b });
    }
    Ok(())
}

/// Smallest value of `g` on the grid over `[a, b]`; `g` returns `None` at
/// points where the claim is vacuous.
pub(crate) fn grid_min(
    a: f64,
    b: f64,
    step: f64,
    mut g: impl FnMut(f64) -> Result<Option<f64>, EvalError>,
) -> Result<Option<(f64, f64)>, EvalError> {
    let mut worst: Option<(f64, f64)> = None;
    for t in sample_grid(a, b, step) {
        if let Some(v) = g(t)? {
            if worst.map_or(true, |w| v < w.1) {
                worst = Some((t, v));
            }
        }
    }
    Ok(worst)
}

fn is_undeviated(alpha: &dyn ScalarFn, t: f64) -> Result<bool, EvalError> {
    Ok((alpha.eval(t)? - t).abs() <= 1e-12 * t.abs().max(1.0))
}

/// `dominant_j - dominated_j >= 0` for every term.
pub(crate) fn dominance(
    id: &str,
    dominant: &[&PiecewiseFn],
    dominated: &[&PiecewiseFn],
    window: (f64, f64),
    step: f64,
) -> Result<Hypothesis, EvalError> {
    let worst = grid_min(window.0, window.1, step, |t| {
        let mut m = f64::INFINITY;
        for (a, b) in dominant.iter().zip(dominated) {
            m = m.min(a.eval(t)? - b.eval(t)?);
        }
        Ok(Some(m))
    })?;
    Ok(Hypothesis::from_margin(id, worst, SIGN_SLACK))
}

/// Where `neg_j < 0`: `other_j >= 0` or `α_j(t) = t`.
pub(crate) fn sign_exemption(
    id: &str,
    neg: &[&PiecewiseFn],
    other: &[&PiecewiseFn],
    alphas: &[&PiecewiseFn],
    window: (f64, f64),
    step: f64,
) -> Result<Hypothesis, EvalError> {
    let worst = grid_min(window.0, window.1, step, |t| {
        let mut m: Option<f64> = None;
        for ((n, o), alpha) in neg.iter().zip(other).zip(alphas) {
            if n.eval(t)? < 0.0 && !is_undeviated(*alpha, t)? {
                let v = o.eval(t)?;
                m = Some(m.map_or(v, |x: f64| x.min(v)));
            }
        }
        Ok(m)
    })?;
    Ok(Hypothesis::from_margin(id, worst, SIGN_SLACK))
}

/// Finite-window proxy for `α_j(t) → +∞`: the lag `t - α_j(t)` must not
/// grow from the first half of the window to the second, so that
/// `α_j(t) >= t - Δ` with `Δ` the largest lag seen.
pub(crate) fn arguments_diverge(
    id: &str,
    alphas: &[&PiecewiseFn],
    window: (f64, f64),
    step: f64,
) -> Result<Hypothesis, EvalError> {
    let (a, b) = window;
    let mid = 0.5 * (a + b);
    let mut worst_delta = 0.0f64;
    let mut worst_point = None;
    let mut growing = None;
    for (j, alpha) in alphas.iter().enumerate() {
        let lag_max = |lo: f64, hi: f64| -> Result<(f64, f64), EvalError> {
            let mut m = (lo, f64::NEG_INFINITY);
            for t in sample_grid(lo, hi, step) {
                let lag = t - alpha.eval(t)?;
                if lag > m.1 {
                    m = (t, lag);
                }
            }
            Ok(m)
        };
        let first = lag_max(a, mid)?;
        let second = lag_max(mid, b)?;
        let delta = first.1.max(second.1);
        if delta >= worst_delta {
            worst_delta = delta;
            worst_point = Some(if second.1 > first.1 { second.0 } else { first.0 });
        }
        if second.1 > first.1 + SIGN_SLACK * first.1.abs().max(1.0) && growing.is_none() {
            growing = Some((j + 1, second.0));
        }
    }
    let mut h = match growing {
        None => Hypothesis::new(id, HypothesisStatus::Verified)
            .with_detail(format!("t - alpha_j(t) <= {worst_delta} on the grid (finite window)")),
        Some((j, t)) => Hypothesis::new(id, HypothesisStatus::NotVerifiable)
            .with_detail(format!("not verifiable at infinity: lag of term {j} grows up to t = {t}")),
    };
    h.worst_point = worst_point;
    h.margin = Some(-worst_delta);
    Ok(h)
}
