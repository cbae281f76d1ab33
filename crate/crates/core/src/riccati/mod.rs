//! Riccati transform `y = pφ'/φ` of the functional-differential equation.
//!
//! With `F(t) = ∫_{t1}^t y/p`, substituting `φ = λ exp(F)` gives
//!
//! ```text
//! y' + y²/p + (q/p) y + Σ r_j exp(-(F(t) - F(α_j(t)))) = (f/λ) exp(-F(t))
//! ```
//!
//! and the homogeneous variant drops the right-hand side and uses
//! comparison coefficients `r_{1,j}`. `F` is carried as a second state
//! component, so every delayed integral is a difference of two state values.

mod comparison;
mod scalar;

use std::cell::Cell;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{CumulativeIntegral, EvalError, FnCoefficient, PiecewiseFn, QuadError, ScalarFn};
use crate::integrator::engine::{integrate, DelaySystem, DenseSolution, EngineOptions, EngineStatus, Past, Segment};
use crate::integrator::{propagate_breakpoints, EquationSpec, ExpRepr, HistorySpec, Repr, SolveError, Trajectory};

pub use comparison::{verify_functional_comparison, ComparisonMode, ComparisonReport, ConditionCheck, FunctionalComparison};
pub use scalar::{verify_scalar_comparison, ScalarRiccatiPair};

/// Default escape bound for `|y|`.
pub const Y_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    pub eq: EquationSpec,
    pub lambda: f64,
    pub t1: f64,
    /// Values of `y` for `t <= t1`.
    pub gamma: PiecewiseFn,
    /// Drop the forcing term and use `r1` (or the equation's own `r_j`).
    pub homogeneous: bool,
    pub r1: Option<Vec<PiecewiseFn>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiOptions {
    pub tol: f64,
    pub y_max: f64,
    pub max_steps: usize,
    pub check_step: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions { tol: 1e-9, y_max: Y_MAX, max_steps: 2_000_000, check_step: 1e-2 }
    }
}

impl RiccatiOptions {
    pub fn with_tol(tol: f64) -> Self {
        RiccatiOptions { tol, ..Self::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("lambda must be nonzero")]
    ZeroLambda,
    #[error("past function is discontinuous at t1 = {t1} (left {left}, right {right})")]
    GammaDiscontinuous { t1: f64, left: f64, right: f64 },
    #[error("{found} comparison coefficients given for {expected} terms")]
    TermCount { expected: usize, found: usize },
    #[error("phi({at}) = {value} is too close to zero for the transform")]
    TransformUndefined { at: f64, value: f64 },
    #[error("t1 = {t1} lies outside the computed range [{lo}, {hi}]")]
    StartOutOfRange { t1: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

impl From<EvalError> for RiccatiError {
    fn from(e: EvalError) -> Self {
        RiccatiError::Solve(SolveError::Eval(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PlusInfinity,
    MinusInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowUp {
    /// Last accepted mesh point, the escape-time estimate.
    pub t: f64,
    pub direction: Direction,
    pub value: f64,
    /// Sizes of the final accepted steps, oldest first.
    pub last_steps: Vec<f64>,
}

impl BlowUp {
    /// Whether the final steps shrink towards the escape point.
    pub fn steps_decreasing(&self) -> bool {
        let s = &self.last_steps;
        s.len() < 2 || s.last() < s.first()
    }
}

#[derive(Debug, Clone)]
enum RicRepr {
    Integrated { sol: DenseSolution<2>, gamma: PiecewiseFn, left: CumulativeIntegral },
    Transformed { traj: Trajectory, theta: PiecewiseFn, hist_t1: f64, phi_t1: f64 },
}

/// `y` and `F = ∫_{t1}^t y/p` on `[t1, horizon]`, with their extension to
/// the left of `t1`.
#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    repr: RicRepr,
    p: PiecewiseFn,
    pub t1: f64,
    pub horizon: f64,
    pub blowup: Option<BlowUp>,
}

impl RiccatiTrajectory {
    pub fn is_clean(&self) -> bool {
        self.blowup.is_none()
    }

    pub fn y(&self, t: f64) -> Option<f64> {
        match &self.repr {
            RicRepr::Integrated { sol, gamma, .. } => {
                if t < self.t1 {
                    gamma.eval(t).ok()
                } else {
                    sol.eval(t).map(|x| x[0])
                }
            }
            RicRepr::Transformed { traj, theta, hist_t1, .. } => {
                if t < *hist_t1 {
                    let j = theta.eval_jet(t).ok()?;
                    Some(self.p.eval(t).ok()? * j.d1 / j.v)
                } else {
                    let (phi, psi) = traj.eval(t)?;
                    Some(psi / phi)
                }
            }
        }
    }

    /// `F(t)`; negative integral of `y/p` over `[t, t1]` when `t < t1`.
    pub fn big_f(&self, t: f64) -> Option<f64> {
        match &self.repr {
            RicRepr::Integrated { sol, left, .. } => {
                if t < self.t1 {
                    left.between(self.t1, t)
                } else {
                    sol.eval(t).map(|x| x[1])
                }
            }
            RicRepr::Transformed { traj, theta, hist_t1, phi_t1 } => {
                let phi = if t < *hist_t1 { theta.eval(t).ok()? } else { traj.phi(t)? };
                Some((phi / phi_t1).ln())
            }
        }
    }

    pub fn y_deriv(&self, t: f64) -> Option<f64> {
        match &self.repr {
            RicRepr::Integrated { sol, .. } => sol.deriv(t).map(|d| d[0]),
            RicRepr::Transformed { traj, .. } => {
                let (phi, psi) = traj.eval(t)?;
                let (dphi, dpsi) = traj.deriv(t)?;
                Some((dpsi - psi / phi * dphi) / phi)
            }
        }
    }

    pub fn mesh(&self) -> Vec<f64> {
        match &self.repr {
            RicRepr::Integrated { sol, .. } => sol.mesh(),
            RicRepr::Transformed { traj, .. } => traj.mesh(),
        }
    }
}

struct RiccatiSystem<'a> {
    p: &'a dyn ScalarFn,
    q: &'a dyn ScalarFn,
    f: Option<(&'a dyn ScalarFn, f64)>,
    terms: Vec<(&'a dyn ScalarFn, &'a dyn ScalarFn)>,
    gamma: &'a dyn ScalarFn,
    left: &'a CumulativeIntegral,
    t1: f64,
    history_fail: Cell<Option<f64>>,
}

impl DelaySystem<2> for RiccatiSystem<'_> {
    fn rhs(&self, t: f64, x: &[f64; 2], past: &Past<'_, 2>) -> Result<[f64; 2], EvalError> {
        let p = self.p.eval(t)?;
        if !(p > 0.0) {
            return Err(EvalError::Domain { t, what: "p must be positive" });
        }
        let q = self.q.eval(t)?;
        let [y, big_f] = *x;
        let mut acc = -(y * y + q * y) / p;
        for (r, alpha) in &self.terms {
            let rv = r.eval(t)?;
            if rv != 0.0 {
                let s = alpha.eval(t)?;
                let f_alpha = past.at(s, t, x)?[1];
                acc -= rv * (f_alpha - big_f).exp();
            }
        }
        if let Some((f, inv_lambda)) = self.f {
            let fv = f.eval(t)?;
            if fv != 0.0 {
                acc += fv * inv_lambda * (-big_f).exp();
            }
        }
        Ok([acc, y / p])
    }

    fn history(&self, s: f64) -> Result<[f64; 2], EvalError> {
        let g = self.gamma.eval(s);
        match (g, self.left.between(self.t1, s)) {
            (Ok(g), Some(big_f)) => Ok([g, big_f]),
            (Err(e), _) => {
                self.history_fail.set(Some(s));
                Err(e)
            }
            (_, None) => {
                self.history_fail.set(Some(s));
                Err(EvalError::OutsideDomain { t: s })
            }
        }
    }
}

fn check_gamma(gamma: &PiecewiseFn, t1: f64) -> Result<(), RiccatiError> {
    let right = gamma.eval(t1)?;
    let left = gamma.eval_left_limit(t1)?;
    if (left - right).abs() > 1e-12 * left.abs().max(right.abs()).max(1.0) {
        return Err(RiccatiError::GammaDiscontinuous { t1, left, right });
    }
    Ok(())
}

/// Integrate the Riccati equation from `t1` to `horizon`, stopping early at
/// a detected escape of `|y|` past `y_max`.
pub fn solve_riccati(prob: &RiccatiProblem, horizon: f64, opts: &RiccatiOptions) -> Result<RiccatiTrajectory, RiccatiError> {
    if prob.lambda == 0.0 {
        return Err(RiccatiError::ZeroLambda);
    }
    let eq = &prob.eq;
    let t1 = prob.t1;
    if !(horizon >= t1) {
        return Err(SolveError::InvalidHorizon { t1, horizon }.into());
    }
    if let Some(r1) = &prob.r1 {
        if r1.len() != eq.terms.len() {
            return Err(RiccatiError::TermCount { expected: eq.terms.len(), found: r1.len() });
        }
    }
    check_gamma(&prob.gamma, t1)?;
    eq.validate(t1, horizon, opts.check_step)?;

    let lowest = eq.min_argument(t1, horizon, opts.check_step).min(t1);
    let mut breaks = prob.gamma.breakpoints();
    breaks.extend(eq.p.breakpoints());
    let integrand = FnCoefficient::new(|s| Ok(prob.gamma.eval(s)? / eq.p.eval(s)?), breaks);
    let left = CumulativeIntegral::new(&integrand, lowest, t1, 1e-2, 1e-13)?;

    let r_coeffs: Vec<&dyn ScalarFn> = match (&prob.r1, prob.homogeneous) {
        (Some(r1), true) => r1.iter().map(|r| r as &dyn ScalarFn).collect(),
        _ => eq.terms.iter().map(|d| &d.r as &dyn ScalarFn).collect(),
    };
    let terms: Vec<(&dyn ScalarFn, &dyn ScalarFn)> =
        r_coeffs.iter().zip(&eq.terms).map(|(&r, d)| (r, &d.alpha as &dyn ScalarFn)).collect();
    let forcing = if prob.homogeneous || eq.is_homogeneous() { None } else { Some((&eq.f as &dyn ScalarFn, 1.0 / prob.lambda)) };

    let mut seeds = vec![t1];
    seeds.extend(prob.gamma.breakpoints_in(lowest, t1));
    for g in [&eq.p, &eq.q, &eq.f] {
        seeds.extend(g.breakpoints_in(t1, horizon));
    }
    for (r, a) in &terms {
        seeds.extend(r.breakpoints_in(t1, horizon));
        seeds.extend(a.breakpoints_in(t1, horizon));
    }
    let alphas: Vec<&dyn ScalarFn> = terms.iter().map(|t| t.1).collect();
    let mesh = propagate_breakpoints(&alphas, &seeds, t1, horizon, 3);

    let sys = RiccatiSystem {
        p: &eq.p,
        q: &eq.q,
        f: forcing,
        terms,
        gamma: &prob.gamma,
        left: &left,
        t1,
        history_fail: Cell::new(None),
    };
    let mut eopts = EngineOptions::with_tol(0.02 * opts.tol);
    eopts.max_steps = opts.max_steps;
    eopts.blowup = Some((1, opts.y_max));
    let y1 = prob.gamma.eval(t1)?;
    let out = integrate(&sys, t1, [y1, 0.0], horizon, &mesh, &eopts, &mut |_: &Segment<2>| false).map_err(|e| {
        match sys.history_fail.get() {
            Some(at) => SolveError::HistoryUndefined { at },
            None => e.into(),
        }
    })?;
    let blowup = match out.status {
        EngineStatus::BlowUp { t, value, .. } => {
            let n = out.sol.segments.len();
            let last_steps = out.sol.segments[n.saturating_sub(5)..].iter().map(|s| s.h).collect();
            let direction = if value > 0.0 { Direction::PlusInfinity } else { Direction::MinusInfinity };
            Some(BlowUp { t, direction, value, last_steps })
        }
        _ => None,
    };
    let reached = out.sol.t_end();
    Ok(RiccatiTrajectory {
        repr: RicRepr::Integrated { sol: out.sol, gamma: prob.gamma.clone(), left },
        p: eq.p.clone(),
        t1,
        horizon: reached,
        blowup,
    })
}

/// `y = pφ'/φ` from a computed solution, started at `t1` (at or after the
/// initial time of `traj`). `λ = φ(t1)`. Left of `t1`, `y` is read from the
/// solution itself (and from `θ` before its initial time).
pub fn riccati_from_solution(
    eq: &EquationSpec,
    hist: &HistorySpec,
    traj: &Trajectory,
    t1: f64,
) -> Result<RiccatiTrajectory, RiccatiError> {
    if !(t1 >= traj.t1 && t1 <= traj.horizon) {
        return Err(RiccatiError::StartOutOfRange { t1, lo: traj.t1, hi: traj.horizon });
    }
    let lowest = eq.min_argument(t1, traj.horizon, 1e-2).min(t1);
    let phi_at = |t: f64| -> Option<f64> {
        if t < traj.t1 {
            hist.theta.eval(t).ok()
        } else {
            traj.phi(t)
        }
    };
    let scale = traj.phi_max_abs().max(1.0);
    let tol = traj.zero_tol * scale;
    if let Some(z) = traj.zeros_in(lowest, traj.horizon).next() {
        return Err(RiccatiError::TransformUndefined { at: z.t, value: z.value });
    }
    let mut grid = crate::integrator::sample_grid(lowest, traj.horizon, 1e-2);
    grid.extend(traj.mesh().into_iter().filter(|&m| m >= lowest));
    for t in grid {
        let v = phi_at(t).ok_or(SolveError::HistoryUndefined { at: t })?;
        if !(v.abs() > tol) {
            return Err(RiccatiError::TransformUndefined { at: t, value: v });
        }
    }
    let phi_t1 = phi_at(t1).expect("checked above");
    let ric = RiccatiTrajectory {
        repr: RicRepr::Transformed { traj: traj.clone(), theta: hist.theta.clone(), hist_t1: traj.t1, phi_t1 },
        p: eq.p.clone(),
        t1,
        horizon: traj.horizon,
        blowup: None,
    };
    Ok(ric)
}

/// Quadrature of `y/p` along a transformed solution, carried with `y`.
struct Accumulate<'a> {
    ric: &'a RiccatiTrajectory,
}

impl DelaySystem<2> for Accumulate<'_> {
    fn rhs(&self, t: f64, _x: &[f64; 2], _past: &Past<'_, 2>) -> Result<[f64; 2], EvalError> {
        let y = self.ric.y(t).ok_or(EvalError::OutsideDomain { t })?;
        let dy = self.ric.y_deriv(t).ok_or(EvalError::OutsideDomain { t })?;
        Ok([dy, y / self.ric.p.eval(t)?])
    }

    fn history(&self, s: f64) -> Result<[f64; 2], EvalError> {
        Err(EvalError::OutsideDomain { t: s })
    }
}

/// `φ = λ exp(F)` on `[t1, horizon]` (or up to the escape point).
pub fn solution_from_riccati(ric: &RiccatiTrajectory, lambda: f64) -> Result<Trajectory, RiccatiError> {
    if lambda == 0.0 {
        return Err(RiccatiError::ZeroLambda);
    }
    let state = match &ric.repr {
        RicRepr::Integrated { sol, .. } => sol.clone(),
        RicRepr::Transformed { traj, .. } => {
            let marks: Vec<f64> = traj.mesh();
            let y1 = ric.y(ric.t1).ok_or(EvalError::OutsideDomain { t: ric.t1 })?;
            let out = integrate(
                &Accumulate { ric },
                ric.t1,
                [y1, 0.0],
                ric.horizon,
                &marks,
                &EngineOptions::with_tol(1e-12),
                &mut |_: &Segment<2>| false,
            )
            .map_err(SolveError::from)?;
            out.sol
        }
    };
    let mesh = state.mesh();
    Ok(Trajectory::from_repr(Repr::Exponential(ExpRepr { scale: lambda, state }), mesh, 0.0, 1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::integrator::{identity, solve_cauchy, DelayTerm, SolveOptions};
    use std::f64::consts::FRAC_PI_2;

    fn pw(s: &str) -> PiecewiseFn {
        parse(s).unwrap()
    }

    fn problem(eq: EquationSpec, gamma: &str) -> RiccatiProblem {
        RiccatiProblem { eq, lambda: 1.0, t1: 0.0, gamma: pw(gamma), homogeneous: false, r1: None }
    }

    #[test]
    fn tangent_escape() {
        let prob = problem(EquationSpec::ode(pw("1"), pw("1"), 0.0), "0");
        let ric = solve_riccati(&prob, 3.0, &RiccatiOptions::default()).unwrap();
        let b = ric.blowup.clone().expect("escape");
        assert!((b.t - FRAC_PI_2).abs() < 1e-4, "{b:?}");
        assert_eq!(b.direction, Direction::MinusInfinity);
        assert!(b.steps_decreasing());
        for t in [0.3, 0.9, 1.4] {
            assert!((ric.y(t).unwrap() + t.tan()).abs() < 1e-7 * (1.0 + t.tan().powi(2)));
        }
    }

    #[test]
    fn trivial_problems_stay_at_zero() {
        let eq = EquationSpec { p: pw("1"), q: pw("0"), f: pw("0"), terms: vec![], t0: 0.0 };
        let ric = solve_riccati(&problem(eq, "0"), 50.0, &RiccatiOptions::default()).unwrap();
        assert!(ric.is_clean());
        assert_eq!(ric.y(50.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_solution_gives_constant_y() {
        let eq = EquationSpec::ode(pw("1"), pw("-1"), 0.0);
        let hist = HistorySpec::new(0.0, pw("exp(t)"), 1.0);
        let traj = solve_cauchy(&eq, &hist, 5.0, &SolveOptions::default()).unwrap();
        let ric = riccati_from_solution(&eq, &hist, &traj, 0.0).unwrap();
        for t in [0.0, 1.0, 4.5] {
            let y = ric.y(t).unwrap();
            assert!((y - 1.0).abs() < 1e-8);
            assert!((ric.y_deriv(t).unwrap() + y * y - 1.0).abs() < 1e-6);
        }
        let back = solution_from_riccati(&ric, 1.0).unwrap();
        for t in [0.5, 2.0, 5.0] {
            assert!((back.phi(t).unwrap() / t.exp() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn sine_transform_is_undefined_at_zero() {
        let eq = EquationSpec::ode(pw("1"), pw("1"), 0.0);
        let hist = HistorySpec::new(0.0, pw("0"), 1.0);
        let traj = solve_cauchy(&eq, &hist, 3.0, &SolveOptions::default()).unwrap();
        assert!(matches!(riccati_from_solution(&eq, &hist, &traj, 0.0), Err(RiccatiError::TransformUndefined { .. })));
        let traj = solve_cauchy(&eq, &hist, 4.0, &SolveOptions::default()).unwrap();
        assert!(matches!(riccati_from_solution(&eq, &hist, &traj, 0.5), Err(RiccatiError::TransformUndefined { .. })));
    }

    #[test]
    fn delayed_integral_matches_solution_ratio() {
        let eq = EquationSpec {
            p: pw("1"),
            q: pw("0"),
            f: pw("0"),
            terms: vec![DelayTerm { r: pw("0.1"), alpha: pw("t - 1") }, DelayTerm { r: pw("-1"), alpha: identity() }],
            t0: 0.0,
        };
        let hist = HistorySpec::new(0.0, pw("exp(t)"), 1.0);
        let traj = solve_cauchy(&eq, &hist, 6.0, &SolveOptions::default()).unwrap();
        let via_phi = riccati_from_solution(&eq, &hist, &traj, 0.0).unwrap();
        let prob = RiccatiProblem {
            eq: eq.clone(),
            lambda: 1.0,
            t1: 0.0,
            gamma: pw("1"),
            homogeneous: true,
            r1: None,
        };
        let ric = solve_riccati(&prob, 6.0, &RiccatiOptions::default()).unwrap();
        for i in 0..=60 {
            let t = i as f64 * 0.1;
            let (a, b) = (ric.y(t).unwrap(), via_phi.y(t).unwrap());
            assert!((a - b).abs() < 1e-7 * b.abs().max(1.0), "t={t} {a} {b}");
            let ratio = (-(ric.big_f(t).unwrap() - ric.big_f(t - 1.0).unwrap())).exp();
            let direct = if t >= 1.0 { traj.phi(t - 1.0).unwrap() } else { (t - 1.0).exp() } / traj.phi(t).unwrap();
            assert!((ratio / direct - 1.0).abs() < 1e-8, "t={t}");
        }
    }
}
