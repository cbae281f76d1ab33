//! Dormand–Prince 5(4) integrator with continuous extension for systems with
//! deviating arguments.
//!
//! Delayed values are read from the history function for arguments at or
//! before the initial time, and from the dense output of accepted steps
//! afterwards. Arguments that fall inside the step being attempted are
//! resolved by fixed-point iteration on the step's own interpolant.

use std::cell::Cell;

use thiserror::Error;

use crate::expr::EvalError;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its quartic continuous extension.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    c: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.c;
        std::array::from_fn(|i| c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i]))))
    }

    pub fn deriv(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.c;
        std::array::from_fn(|i| {
            (c[1][i]
                + (1.0 - 2.0 * th) * c[2][i]
                + th * (2.0 - 3.0 * th) * c[3][i]
                + 2.0 * th * th1 * (th1 - th) * c[4][i])
                / self.h
        })
    }

    pub fn start(&self) -> [f64; N] {
        self.c[0]
    }

    pub fn end(&self) -> [f64; N] {
        std::array::from_fn(|i| self.c[0][i] + self.c[1][i])
    }
}

/// Piecewise-polynomial solution on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    pub t_start: f64,
    pub x_start: [f64; N],
    pub segments: Vec<Segment<N>>,
}

impl<const N: usize> DenseSolution<N> {
    pub fn new(t_start: f64, x_start: [f64; N]) -> Self {
        DenseSolution { t_start, x_start, segments: Vec::new() }
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t_start, Segment::t1)
    }

    pub fn x_end(&self) -> [f64; N] {
        self.segments.last().map_or(self.x_start, Segment::end)
    }

    fn segment_index(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() || t < self.t_start || t > self.t_end() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t0 <= t);
        Some(idx.saturating_sub(1))
    }

    /// State at `t`; at a step boundary the later step is used.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if t == self.t_start && self.segments.is_empty() {
            return Some(self.x_start);
        }
        self.segment_index(t).map(|i| self.segments[i].eval(t))
    }

    pub fn deriv(&self, t: f64) -> Option<[f64; N]> {
        self.segment_index(t).map(|i| self.segments[i].deriv(t))
    }

    pub fn segment_at(&self, t: f64) -> Option<&Segment<N>> {
        self.segment_index(t).map(|i| &self.segments[i])
    }

    /// Accepted step boundaries, starting with `t_start`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = vec![self.t_start];
        m.extend(self.segments.iter().map(Segment::t1));
        m
    }
}

/// Right-hand side of `x' = F(t, x(t), x(·))` with access to past states.
pub trait DelaySystem<const N: usize> {
    fn rhs(&self, t: f64, x: &[f64; N], past: &Past<'_, N>) -> Result<[f64; N], EvalError>;

    /// State for arguments at or before the initial time.
    fn history(&self, s: f64) -> Result<[f64; N], EvalError>;
}

/// Read access to the solution at earlier times during a step.
pub struct Past<'a, const N: usize> {
    history: &'a dyn Fn(f64) -> Result<[f64; N], EvalError>,
    sol: &'a DenseSolution<N>,
    trial: Option<&'a Segment<N>>,
    step_t: f64,
    step_x: [f64; N],
    step_f: [f64; N],
    in_step: Cell<bool>,
}

impl<'a, const N: usize> Past<'a, N> {
    /// Reader over a finished solution, for evaluating the right-hand side
    /// after the fact.
    pub fn over(sol: &'a DenseSolution<N>, history: &'a dyn Fn(f64) -> Result<[f64; N], EvalError>) -> Self {
        Past {
            history,
            sol,
            trial: None,
            step_t: sol.t_end(),
            step_x: sol.x_end(),
            step_f: [0.0; N],
            in_step: Cell::new(false),
        }
    }

    /// State at argument `s` when evaluating the right-hand side at time `t`
    /// with current state `x`.
    pub fn at(&self, s: f64, t: f64, x: &[f64; N]) -> Result<[f64; N], EvalError> {
        if s >= t - 1e-13 * t.abs().max(1.0) {
            return Ok(*x);
        }
        if s <= self.sol.t_start {
            return (self.history)(s);
        }
        if s <= self.sol.t_end() {
            if let Some(v) = self.sol.eval(s) {
                return Ok(v);
            }
        }
        self.in_step.set(true);
        if let Some(seg) = self.trial {
            return Ok(seg.eval(s));
        }
        if let Some(last) = self.sol.segments.last() {
            return Ok(last.eval(s));
        }
        let dt = s - self.step_t;
        Ok(std::array::from_fn(|i| self.step_x[i] + dt * self.step_f[i]))
    }
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
    /// Stop with [`EngineStatus::BlowUp`] once `|x[i]|` exceeds the bound for
    /// any of the first `k` components.
    pub blowup: Option<(usize, f64)>,
}

impl EngineOptions {
    pub fn with_tol(tol: f64) -> Self {
        EngineOptions { rtol: tol, atol: tol, h_max: f64::INFINITY, h_init: None, max_steps: 2_000_000, blowup: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EngineStatus {
    Completed,
    BlowUp { t: f64, value: f64, last_step: f64 },
    Stopped { t: f64 },
}

#[derive(Debug, Clone)]
pub struct EngineOutcome<const N: usize> {
    pub sol: DenseSolution<N>,
    pub status: EngineStatus,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

struct Attempt<const N: usize> {
    x_new: [f64; N],
    k7: [f64; N],
    err: f64,
    seg: Segment<N>,
}

fn finite<const N: usize>(v: &[f64; N], t: f64) -> Result<(), EvalError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::NonFinite { t })
    }
}

fn combo<const N: usize>(x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| x[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

struct Stepper<'a, S, const N: usize> {
    sys: &'a S,
    opts: &'a EngineOptions,
}

impl<S: DelaySystem<N>, const N: usize> Stepper<'_, S, N> {
    #[allow(clippy::too_many_arguments)]
    fn attempt(
        &self,
        sol: &DenseSolution<N>,
        t: f64,
        x: &[f64; N],
        k1: &[f64; N],
        h: f64,
        end_on_mesh: bool,
        trial: Option<&Segment<N>>,
    ) -> Result<(Attempt<N>, bool), EvalError> {
        let history = |s: f64| self.sys.history(s);
        let past = Past { history: &history, sol, trial, step_t: t, step_x: *x, step_f: *k1, in_step: Cell::new(false) };
        let t_end = t + h;
        let stage_t = |c: f64| {
            if c == 1.0 {
                if end_on_mesh {
                    t_end.next_down()
                } else {
                    t_end
                }
            } else {
                t + c * h
            }
        };
        let eval = |c: f64, y: [f64; N]| -> Result<[f64; N], EvalError> {
            let ts = stage_t(c);
            let k = self.sys.rhs(ts, &y, &past)?;
            finite(&k, ts)?;
            Ok(k)
        };
        let y2 = combo(x, h, &[(A21, k1)]);
        let k2 = eval(C[1], y2)?;
        let y3 = combo(x, h, &[(A31, k1), (A32, &k2)]);
        let k3 = eval(C[2], y3)?;
        let y4 = combo(x, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
        let k4 = eval(C[3], y4)?;
        let y5 = combo(x, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = eval(C[4], y5)?;
        let y6 = combo(x, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = eval(C[5], y6)?;
        let x_new = combo(x, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        finite(&x_new, t_end)?;
        let k7 = eval(C[6], x_new)?;

        let mut acc = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.opts.atol + self.opts.rtol * x[i].abs().max(x_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        let err = (acc / N as f64).sqrt();

        let mut c = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = x_new[i] - x[i];
            let bspl = h * k1[i] - ydiff;
            c[0][i] = x[i];
            c[1][i] = ydiff;
            c[2][i] = bspl;
            c[3][i] = ydiff - h * k7[i] - bspl;
            c[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let seg = Segment { t0: t, h, c };
        Ok((Attempt { x_new, k7, err, seg }, past.in_step.get()))
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        sol: &DenseSolution<N>,
        t: f64,
        x: &[f64; N],
        k1: &[f64; N],
        h: f64,
        end_on_mesh: bool,
    ) -> Result<Attempt<N>, EvalError> {
        let (mut att, in_step) = self.attempt(sol, t, x, k1, h, end_on_mesh, None)?;
        if !in_step {
            return Ok(att);
        }
        for _ in 0..8 {
            let trial = att.seg.clone();
            let (next, _) = self.attempt(sol, t, x, k1, h, end_on_mesh, Some(&trial))?;
            let change = (0..N)
                .map(|i| {
                    let sc = self.opts.atol + self.opts.rtol * next.x_new[i].abs();
                    (next.x_new[i] - att.x_new[i]).abs() / sc
                })
                .fold(0.0, f64::max);
            att = next;
            if change < 1e-2 {
                break;
            }
        }
        Ok(att)
    }
}

fn norm_scaled<const N: usize>(v: &[f64; N], x: &[f64; N], opts: &EngineOptions) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = opts.atol + opts.rtol * x[i].abs();
            (v[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

/// Integrate from `(t0, x0)` to `t_end`, landing exactly on every point of
/// `mesh` that lies strictly inside the interval. `stop` is called after every
/// accepted step and may end the run early.
pub fn integrate<S, const N: usize>(
    sys: &S,
    t0: f64,
    x0: [f64; N],
    t_end: f64,
    mesh: &[f64],
    opts: &EngineOptions,
    stop: &mut dyn FnMut(&Segment<N>) -> bool,
) -> Result<EngineOutcome<N>, EngineError>
where
    S: DelaySystem<N>,
{
    let mut sol = DenseSolution::new(t0, x0);
    let out = |sol, status, accepted, rejected| Ok(EngineOutcome { sol, status, accepted, rejected });
    if t_end <= t0 {
        return out(sol, EngineStatus::Completed, 0, 0);
    }
    let span = t_end - t0;
    let snap = |a: f64, b: f64| (b - a).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut marks: Vec<f64> = mesh.iter().copied().filter(|&m| m > t0 && m < t_end && !snap(t0, m)).collect();
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|a, b| snap(*a, *b));
    if marks.last().is_some_and(|&m| snap(m, t_end)) {
        marks.pop();
    }
    marks.push(t_end);

    let stepper = Stepper { sys, opts };
    let mut t = t0;
    let mut x = x0;
    let f_at = |sol: &DenseSolution<N>, t: f64, x: &[f64; N]| -> Result<[f64; N], EvalError> {
        let history = |s: f64| sys.history(s);
        let past = Past { history: &history, sol, trial: None, step_t: t, step_x: *x, step_f: [0.0; N], in_step: Cell::new(false) };
        let k = sys.rhs(t, x, &past)?;
        finite(&k, t)?;
        Ok(k)
    };
    let mut k1 = f_at(&sol, t, &x)?;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let d0 = norm_scaled(&x, &x, opts);
            let d1 = norm_scaled(&k1, &x, opts);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span.max(1.0)
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(opts.h_max)
    .min(span);
    let mut next_mark = 0;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut last_rejected = false;

    while next_mark < marks.len() {
        if accepted + rejected >= opts.max_steps {
            return Err(EngineError::MaxSteps { t });
        }
        let target = marks[next_mark];
        let mut h_try = h.min(opts.h_max);
        let mut on_mesh = false;
        if t + h_try >= target || snap(t + h_try, target) {
            h_try = target - t;
            on_mesh = true;
        } else if t + 2.0 * h_try > target {
            // Split the remainder evenly instead of leaving a sliver.
            h_try = 0.5 * (target - t);
        }
        if h_try < 1e-14 * t.abs().max(1.0) {
            return classify_underflow(sol, t, &x, h_try, opts, accepted, rejected);
        }
        let att = match stepper.step(&sol, t, &x, &k1, h_try, on_mesh) {
            Ok(a) => a,
            Err(EvalError::NonFinite { .. }) => {
                rejected += 1;
                last_rejected = true;
                h = 0.25 * h_try;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if att.err <= 1.0 {
            accepted += 1;
            let seg = att.seg;
            let t_new = if on_mesh { target } else { t + h_try };
            let fac = if att.err == 0.0 { 5.0 } else { (0.9 * att.err.powf(-0.2)).clamp(0.2, 5.0) };
            h = if last_rejected { h_try * fac.min(1.0) } else { h_try * fac };
            last_rejected = false;
            sol.segments.push(seg);
            t = t_new;
            x = att.x_new;
            if on_mesh {
                next_mark += 1;
                if next_mark < marks.len() {
                    k1 = match f_at(&sol, t, &x) {
                        Ok(k) => k,
                        Err(EvalError::NonFinite { .. }) => {
                            return classify_underflow(sol, t, &x, h_try, opts, accepted, rejected)
                        }
                        Err(e) => return Err(e.into()),
                    };
                }
            } else {
                k1 = att.k7;
            }
            if let Some((k, bound)) = opts.blowup {
                if let Some(&value) = x[..k].iter().find(|v| v.abs() > bound) {
                    let status = EngineStatus::BlowUp { t, value, last_step: h_try };
                    return out(sol, status, accepted, rejected);
                }
            }
            if stop(sol.segments.last().expect("just pushed")) {
                return out(sol, EngineStatus::Stopped { t }, accepted, rejected);
            }
        } else {
            rejected += 1;
            last_rejected = true;
            h = h_try * (0.9 * att.err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    out(sol, EngineStatus::Completed, accepted, rejected)
}

fn classify_underflow<const N: usize>(
    sol: DenseSolution<N>,
    t: f64,
    x: &[f64; N],
    h: f64,
    opts: &EngineOptions,
    accepted: usize,
    rejected: usize,
) -> Result<EngineOutcome<N>, EngineError> {
    if let Some((k, bound)) = opts.blowup {
        if let Some(&value) = x[..k].iter().find(|v| v.abs() > bound.sqrt()) {
            let status = EngineStatus::BlowUp { t, value, last_step: h };
            return Ok(EngineOutcome { sol, status, accepted, rejected });
        }
    }
    Err(EngineError::StepUnderflow { t, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl DelaySystem<2> for Oscillator {
        fn rhs(&self, _t: f64, x: &[f64; 2], _past: &Past<'_, 2>) -> Result<[f64; 2], EvalError> {
            Ok([x[1], -x[0]])
        }
        fn history(&self, _s: f64) -> Result<[f64; 2], EvalError> {
            Ok([0.0, 1.0])
        }
    }

    /// x'(t) = -x(t - 1), x = 1 on [-1, 0]: x = 1 - t on [0, 1],
    /// x = 1 - t + (t - 1)^2 / 2 on [1, 2].
    struct UnitDelay;

    impl DelaySystem<1> for UnitDelay {
        fn rhs(&self, t: f64, x: &[f64; 1], past: &Past<'_, 1>) -> Result<[f64; 1], EvalError> {
            Ok([-past.at(t - 1.0, t, x)?[0]])
        }
        fn history(&self, _s: f64) -> Result<[f64; 1], EvalError> {
            Ok([1.0])
        }
    }

    /// x'(t) = -x(t/2): the lag vanishes at t = 0, so early steps read
    /// arguments inside themselves.
    struct Pantograph;

    impl DelaySystem<1> for Pantograph {
        fn rhs(&self, t: f64, x: &[f64; 1], past: &Past<'_, 1>) -> Result<[f64; 1], EvalError> {
            Ok([-past.at(0.5 * t, t, x)?[0]])
        }
        fn history(&self, _s: f64) -> Result<[f64; 1], EvalError> {
            Ok([1.0])
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let out = integrate(&Oscillator, 0.0, [0.0, 1.0], 10.0, &[], &EngineOptions::with_tol(1e-10), &mut |_| false)
            .unwrap();
        assert_eq!(out.status, EngineStatus::Completed);
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            let v = out.sol.eval(t).unwrap();
            assert!((v[0] - t.sin()).abs() < 1e-8, "t={t}");
            let d = out.sol.deriv(t).unwrap();
            assert!((d[0] - t.cos()).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn method_of_steps_unit_delay() {
        let out = integrate(&UnitDelay, 0.0, [1.0], 2.0, &[1.0], &EngineOptions::with_tol(1e-10), &mut |_| false).unwrap();
        assert!(out.sol.mesh().iter().any(|&m| m == 1.0));
        for i in 0..=200 {
            let t = i as f64 * 0.01;
            let exact = if t <= 1.0 { 1.0 - t } else { 1.0 - t + 0.5 * (t - 1.0).powi(2) };
            assert!((out.sol.eval(t).unwrap()[0] - exact).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn vanishing_lag_uses_in_step_iteration() {
        // Series solution: x(t) = sum_k (-1)^k t^k / (k! 2^{k(k-1)/2}).
        let out = integrate(&Pantograph, 0.0, [1.0], 3.0, &[], &EngineOptions::with_tol(1e-10), &mut |_| false).unwrap();
        let exact = |t: f64| {
            let mut s = 0.0;
            let mut term = 1.0;
            for k in 0..40 {
                s += term;
                term *= -t / ((k + 1) as f64 * 2f64.powi(k));
            }
            s
        };
        for i in 0..=30 {
            let t = i as f64 * 0.1;
            assert!((out.sol.eval(t).unwrap()[0] - exact(t)).abs() < 1e-8, "t={t}");
        }
    }

    struct Escape;

    impl DelaySystem<1> for Escape {
        fn rhs(&self, _t: f64, x: &[f64; 1], _past: &Past<'_, 1>) -> Result<[f64; 1], EvalError> {
            Ok([1.0 + x[0] * x[0]])
        }
        fn history(&self, _s: f64) -> Result<[f64; 1], EvalError> {
            Ok([0.0])
        }
    }

    #[test]
    fn blowup_of_tangent() {
        let mut opts = EngineOptions::with_tol(1e-10);
        opts.blowup = Some((1, 1e8));
        let out = integrate(&Escape, 0.0, [0.0], 3.0, &[], &opts, &mut |_| false).unwrap();
        match out.status {
            EngineStatus::BlowUp { t, value, .. } => {
                assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-6, "t={t}");
                assert!(value > 1e8);
            }
            s => panic!("unexpected {s:?}"),
        }
    }
}
