//! Cauchy problem for `(pφ')' + qφ' + Σ r_j φ(α_j(t)) = f` in the system form
//! `φ' = ψ/p`, `ψ' = -Σ r_j φ(α_j(t)) - (q/p)ψ + f`.

use std::cell::Cell;

use serde::Serialize;
use thiserror::Error;

use super::engine::{integrate, DelaySystem, DenseSolution, EngineError, EngineOptions, EngineStatus, Past, Segment};
use super::trajectory::{Repr, Trajectory};
use crate::expr::{EvalError, PiecewiseFn, ScalarFn};

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub r: PiecewiseFn,
    pub alpha: PiecewiseFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub p: PiecewiseFn,
    pub q: PiecewiseFn,
    pub f: PiecewiseFn,
    pub terms: Vec<DelayTerm>,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistorySpec {
    pub t1: f64,
    pub theta: PiecewiseFn,
    pub zeta: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("p must be positive, but p({t}) = {value}")]
    NonPositiveP { t: f64, value: f64 },
    #[error("term {term}: alpha({t}) = {alpha} lies ahead of t")]
    AdvancedArgument { term: usize, t: f64, alpha: f64 },
    #[error("initial function is discontinuous at t1 = {t1} (left {left}, right {right})")]
    HistoryDiscontinuous { t1: f64, left: f64, right: f64 },
    #[error("initial function is not defined at t = {at}; extend it further left")]
    HistoryUndefined { at: f64 },
    #[error("initial time {t1} precedes the domain start {t0}")]
    StartBeforeDomain { t1: f64, t0: f64 },
    #[error("horizon {horizon} must not precede the initial time {t1}")]
    InvalidHorizon { t1: f64, horizon: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("residual {value:e} at t = {t} exceeds the residual tolerance")]
    Residual { t: f64, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<EngineError> for SolveError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::StepUnderflow { t, h } => SolveError::StepUnderflow { t, h },
            EngineError::MaxSteps { t } => SolveError::MaxSteps { t },
            EngineError::Eval(e) => SolveError::Eval(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Relative to `max(1, max |φ|)`.
    pub zero_tol: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
    /// Depth of the propagated discontinuity tree.
    pub breakpoint_order: usize,
    /// Sampling step for the coefficient invariant checks.
    pub check_step: f64,
    /// End the run at the first sign change of `φ` after the start.
    pub stop_at_first_zero: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            zero_tol: 1e-10,
            residual_tol: 1e-6,
            max_steps: 2_000_000,
            breakpoint_order: 3,
            check_step: 1e-2,
            stop_at_first_zero: false,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Self::default() }
    }
}

impl EquationSpec {
    /// `(pφ')' + rφ = 0`.
    pub fn ode(p: PiecewiseFn, r: PiecewiseFn, t0: f64) -> EquationSpec {
        EquationSpec {
            p,
            q: PiecewiseFn::constant(0.0),
            f: PiecewiseFn::constant(0.0),
            terms: vec![DelayTerm { r, alpha: identity() }],
            t0,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.f.as_constant() == Some(0.0)
    }

    /// The same equation with `f` replaced by zero.
    pub fn homogeneous(&self) -> EquationSpec {
        EquationSpec { f: PiecewiseFn::constant(0.0), ..self.clone() }
    }

    /// Sample `p > 0` and `α_j(t) <= t` on `[a, b]`.
    pub fn validate(&self, a: f64, b: f64, step: f64) -> Result<(), SolveError> {
        for t in sample_grid(a, b, step) {
            let p = self.p.eval(t)?;
            if !(p > 0.0) {
                return Err(SolveError::NonPositiveP { t, value: p });
            }
            for (j, term) in self.terms.iter().enumerate() {
                let alpha = term.alpha.eval(t)?;
                if alpha > t + 1e-12 * t.abs().max(1.0) {
                    return Err(SolveError::AdvancedArgument { term: j + 1, t, alpha });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn coeffs(&self) -> Coeffs<'_> {
        Coeffs {
            p: &self.p,
            q: &self.q,
            f: &self.f,
            terms: self.terms.iter().map(|d| (&d.r as &dyn ScalarFn, &d.alpha as &dyn ScalarFn)).collect(),
        }
    }

    /// Smallest `α_j(t)` over `[a, b]` on the sampling grid (and `a` itself).
    pub fn min_argument(&self, a: f64, b: f64, step: f64) -> f64 {
        self.coeffs().min_argument(a, b, step)
    }
}

pub fn identity() -> PiecewiseFn {
    crate::expr::parse("t").expect("identity parses")
}

impl HistorySpec {
    pub fn new(t1: f64, theta: PiecewiseFn, zeta: f64) -> HistorySpec {
        HistorySpec { t1, theta, zeta }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let right = self.theta.eval(self.t1)?;
        let left = self.theta.eval_left_limit(self.t1)?;
        if (left - right).abs() > 1e-12 * left.abs().max(right.abs()).max(1.0) {
            return Err(SolveError::HistoryDiscontinuous { t1: self.t1, left, right });
        }
        Ok(())
    }
}

pub(crate) fn sample_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    if !(b > a) {
        return vec![a];
    }
    let n = ((b - a) / step).ceil().clamp(1.0, 200_000.0) as usize;
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// Borrowed coefficient set, so derived equations need not be expressions.
pub(crate) struct Coeffs<'a> {
    pub p: &'a dyn ScalarFn,
    pub q: &'a dyn ScalarFn,
    pub f: &'a dyn ScalarFn,
    pub terms: Vec<(&'a dyn ScalarFn, &'a dyn ScalarFn)>,
}

impl Coeffs<'_> {
    pub(crate) fn min_argument(&self, a: f64, b: f64, step: f64) -> f64 {
        let mut m = a;
        for t in sample_grid(a, b, step) {
            for (_, alpha) in &self.terms {
                if let Ok(v) = alpha.eval(t) {
                    m = m.min(v);
                }
            }
        }
        m
    }

    fn rhs_with(&self, t: f64, x: &[f64; 2], past: &Past<'_, 2>) -> Result<[f64; 2], EvalError> {
        let p = self.p.eval(t)?;
        if !(p > 0.0) {
            return Err(EvalError::Domain { t, what: "p must be positive" });
        }
        let q = self.q.eval(t)?;
        let f = self.f.eval(t)?;
        let mut acc = f - q / p * x[1];
        for (r, alpha) in &self.terms {
            let rv = r.eval(t)?;
            if rv != 0.0 {
                let s = alpha.eval(t)?;
                acc -= rv * past.at(s, t, x)?[0];
            }
        }
        Ok([x[1] / p, acc])
    }
}

struct CauchySystem<'a> {
    c: &'a Coeffs<'a>,
    theta: &'a dyn ScalarFn,
    history_fail: Cell<Option<f64>>,
}

impl DelaySystem<2> for CauchySystem<'_> {
    fn rhs(&self, t: f64, x: &[f64; 2], past: &Past<'_, 2>) -> Result<[f64; 2], EvalError> {
        self.c.rhs_with(t, x, past)
    }

    fn history(&self, s: f64) -> Result<[f64; 2], EvalError> {
        match self.theta.eval(s) {
            Ok(v) => Ok([v, 0.0]),
            Err(e) => {
                self.history_fail.set(Some(s));
                Err(e)
            }
        }
    }
}

/// Mesh points forced on the integrator: coefficient breakpoints, the start
/// point, and their images under the deviating arguments up to `order`.
pub(crate) fn propagate_breakpoints(
    alphas: &[&dyn ScalarFn],
    seeds: &[f64],
    t1: f64,
    horizon: f64,
    order: usize,
) -> Vec<f64> {
    const CAP: usize = 100_000;
    let grid = sample_grid(t1, horizon, (horizon - t1) / 30_000f64.min(((horizon - t1) / 1e-3).max(1000.0)));
    let snap = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let tables: Vec<(&dyn ScalarFn, Vec<f64>, bool)> = alphas
        .iter()
        .filter_map(|&a| {
            let g: Vec<f64> = grid.iter().map(|&t| a.eval(t).unwrap_or(f64::NAN)).collect();
            if g.iter().zip(&grid).all(|(v, t)| v == t) {
                return None;
            }
            let monotone = g.windows(2).all(|w| w[0] <= w[1]);
            Some((a, g, monotone))
        })
        .collect();

    let mut all: Vec<f64> = seeds.iter().copied().filter(|&s| s > t1 && s < horizon).collect();
    let mut level: Vec<f64> = seeds.to_vec();
    for _ in 0..order {
        let mut next = Vec::new();
        for (alpha, g, monotone) in &tables {
            for &d in &level {
                let crossings: Vec<usize> = if *monotone {
                    let i = g.partition_point(|&v| v < d);
                    if i == 0 || i >= g.len() {
                        Vec::new()
                    } else {
                        vec![i - 1]
                    }
                } else {
                    (0..g.len() - 1).filter(|&i| (g[i] < d) != (g[i + 1] < d)).collect()
                };
                for i in crossings {
                    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
                    let below = g[i] < d;
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let v = alpha.eval(mid).unwrap_or(f64::NAN);
                        if (v < d) == below {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    if hi > t1 && hi < horizon && !snap(hi, t1) {
                        next.push(hi);
                    }
                }
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| snap(*a, *b));
        all.extend_from_slice(&next);
        if all.len() > CAP || next.is_empty() {
            break;
        }
        level = next;
    }
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| snap(*a, *b));
    all.truncate(CAP);
    all
}

/// Stop callback that fires at the first sign change of `φ` after the start.
fn first_zero_stop() -> impl FnMut(&Segment<2>) -> bool {
    let mut last_sign: Option<bool> = None;
    move |seg: &Segment<2>| {
        for k in 1..=8 {
            let v = seg.eval(seg.t0 + seg.h * k as f64 / 8.0)[0];
            if v == 0.0 {
                continue;
            }
            let s = v > 0.0;
            match last_sign {
                Some(prev) if prev != s => return true,
                _ => last_sign = Some(s),
            }
        }
        false
    }
}

/// Integrate `coeffs` from `(t1, φ1, ψ1)` with `φ = θ` to the left of `t1`.
pub(crate) fn solve_system(
    c: &Coeffs<'_>,
    theta: &dyn ScalarFn,
    t1: f64,
    x1: [f64; 2],
    horizon: f64,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(SolveError::InvalidTolerance(opts.tol));
    }
    if !(horizon >= t1) || !horizon.is_finite() {
        return Err(SolveError::InvalidHorizon { t1, horizon });
    }
    let lowest = c.min_argument(t1, horizon, opts.check_step);
    if lowest < t1 {
        theta.eval(lowest).map_err(|_| SolveError::HistoryUndefined { at: lowest })?;
    }

    let mut seeds = vec![t1];
    seeds.extend(theta.breakpoints_in(lowest, t1));
    let mut coef_breaks = Vec::new();
    for g in [c.p, c.q, c.f] {
        coef_breaks.extend(g.breakpoints_in(t1, horizon));
    }
    for (r, a) in &c.terms {
        coef_breaks.extend(r.breakpoints_in(t1, horizon));
        coef_breaks.extend(a.breakpoints_in(t1, horizon));
    }
    seeds.extend(coef_breaks);
    let alphas: Vec<&dyn ScalarFn> = c.terms.iter().map(|t| t.1).collect();
    let mesh = propagate_breakpoints(&alphas, &seeds, t1, horizon, opts.breakpoint_order);

    let sys = CauchySystem { c, theta, history_fail: Cell::new(None) };
    // Local tolerance tightened so the global error stays near `tol`.
    let mut eopts = EngineOptions::with_tol(0.02 * opts.tol);
    eopts.max_steps = opts.max_steps;
    let mut never = |_: &Segment<2>| false;
    let mut first_zero = first_zero_stop();
    let stop: &mut dyn FnMut(&Segment<2>) -> bool = if opts.stop_at_first_zero { &mut first_zero } else { &mut never };
    let out = integrate(&sys, t1, x1, horizon, &mesh, &eopts, stop).map_err(|e| match sys.history_fail.get() {
        Some(at) => SolveError::HistoryUndefined { at },
        None => e.into(),
    })?;
    debug_assert!(!matches!(out.status, EngineStatus::BlowUp { .. }));

    let history = |s: f64| sys.history(s);
    let (worst_t, worst) = residual(&out.sol, &history, |t, x, past| c.rhs_with(t, x, past))?;
    if worst > opts.residual_tol {
        return Err(SolveError::Residual { t: worst_t, value: worst });
    }
    Ok(Trajectory::from_repr(Repr::Dense(out.sol), mesh, worst, opts.zero_tol))
}

const GAUSS3: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];

/// Largest scaled defect `|x' - F(t, x)|` of the dense output at three Gauss
/// points per step.
pub(crate) fn residual<const N: usize>(
    sol: &DenseSolution<N>,
    history: &dyn Fn(f64) -> Result<[f64; N], EvalError>,
    rhs: impl Fn(f64, &[f64; N], &Past<'_, N>) -> Result<[f64; N], EvalError>,
) -> Result<(f64, f64), EvalError> {
    let past = Past::over(sol, history);
    let mut worst = (sol.t_start, 0.0);
    for seg in &sol.segments {
        for g in GAUSS3 {
            let t = seg.t0 + g * seg.h;
            let x = seg.eval(t);
            let dx = seg.deriv(t);
            let f = rhs(t, &x, &past)?;
            let scale = x.iter().chain(f.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
            let r = (0..N).map(|i| (dx[i] - f[i]).abs()).fold(0.0, f64::max) / scale;
            if r > worst.1 {
                worst = (t, r);
            }
        }
    }
    Ok(worst)
}

/// Solve the Cauchy problem on `[t1, horizon]`.
pub fn solve_cauchy(
    eq: &EquationSpec,
    hist: &HistorySpec,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    if hist.t1 < eq.t0 {
        return Err(SolveError::StartBeforeDomain { t1: hist.t1, t0: eq.t0 });
    }
    if !(horizon >= hist.t1) {
        return Err(SolveError::InvalidHorizon { t1: hist.t1, horizon });
    }
    eq.validate(hist.t1, horizon, opts.check_step)?;
    hist.validate()?;
    let phi1 = hist.theta.eval(hist.t1)?;
    let psi1 = eq.p.eval(hist.t1)? * hist.zeta;
    solve_system(&eq.coeffs(), &hist.theta, hist.t1, [phi1, psi1], horizon, opts)
}

/// Solve `(pφ')' + q φ' + rφ = 0` on `[a, b]` from `(φ(a), φ'(a))`.
pub(crate) fn solve_ode_with_q(
    p: &dyn ScalarFn,
    q: &dyn ScalarFn,
    r: &dyn ScalarFn,
    interval: (f64, f64),
    ic: (f64, f64),
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    let (a, b) = interval;
    let zero = PiecewiseFn::constant(0.0);
    let id = identity();
    let c = Coeffs { p, q, f: &zero, terms: vec![(r, &id)] };
    let pa = p.eval(a)?;
    if !(pa > 0.0) {
        return Err(SolveError::NonPositiveP { t: a, value: pa });
    }
    let theta = PiecewiseFn::constant(ic.0);
    solve_system(&c, &theta, a, [ic.0, pa * ic.1], b, opts)
}

/// Solve `(pφ')' + rφ = 0` on `[a, b]` from `(φ(a), φ'(a))`.
pub fn solve_ode_interval(
    p: &dyn ScalarFn,
    r: &dyn ScalarFn,
    interval: (f64, f64),
    ic: (f64, f64),
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    solve_ode_with_q(p, &PiecewiseFn::constant(0.0), r, interval, ic, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePair {
    pub tau1: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalOscillation {
    pub oscillatory: bool,
    pub witness: Option<ConjugatePair>,
    pub starts_scanned: usize,
}

pub const DEFAULT_SCAN_POINTS: usize = 64;

/// Conjugate-point scan on `[a, b]` for `(pφ')' + qφ' + rφ = 0`.
pub(crate) fn conjugate_scan(
    p: &dyn ScalarFn,
    q: &dyn ScalarFn,
    r: &dyn ScalarFn,
    interval: (f64, f64),
    scan_points: usize,
    tol: f64,
) -> Result<IntervalOscillation, SolveError> {
    let (a, b) = interval;
    let n = scan_points.max(1);
    let mut opts = SolveOptions::with_tol(tol);
    opts.stop_at_first_zero = true;
    for k in 0..n {
        let tau1 = if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 };
        if tau1 >= b {
            continue;
        }
        let traj = solve_ode_with_q(p, q, r, (tau1, b), (0.0, 1.0), &opts)?;
        if let Some(z) = traj.zeros.first() {
            if z.t <= b {
                let witness = ConjugatePair { tau1, tau2: z.t };
                return Ok(IntervalOscillation { oscillatory: true, witness: Some(witness), starts_scanned: k + 1 });
            }
        }
    }
    Ok(IntervalOscillation { oscillatory: false, witness: None, starts_scanned: n })
}

/// True when some solution of `(pφ')' + rφ = 0` has two zeros in `[a, b]`,
/// so that every solution vanishes there by Sturm separation.
pub fn interval_oscillatory(
    p: &dyn ScalarFn,
    r: &dyn ScalarFn,
    interval: (f64, f64),
    scan_points: usize,
    tol: f64,
) -> Result<IntervalOscillation, SolveError> {
    conjugate_scan(p, &PiecewiseFn::constant(0.0), r, interval, scan_points, tol)
}
