//! Dense solutions `(φ, ψ = pφ')`, zero detection and export.

use std::io::{self, Write};

use serde::Serialize;

use super::engine::DenseSolution;
use crate::expr::{EvalError, ScalarFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    SignChange,
    Tangency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    pub t: f64,
    /// Half-width of the final bracketing interval.
    pub error_bound: f64,
    pub value: f64,
    pub kind: ZeroKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroReport {
    pub zeros: Vec<Zero>,
    pub near_zeros: Vec<Zero>,
    pub horizon: f64,
}

/// `φ = scale · exp(F)` and `ψ = y φ`, built from a Riccati state `(y, F)`.
#[derive(Debug, Clone)]
pub(crate) struct ExpRepr {
    pub scale: f64,
    pub state: DenseSolution<2>,
}

#[derive(Debug, Clone)]
pub(crate) enum Repr {
    Dense(DenseSolution<2>),
    Exponential(ExpRepr),
}

/// Solution on `[t1, horizon]`. Immutable once built.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub(crate) repr: Repr,
    pub t1: f64,
    /// End of the computed range.
    pub horizon: f64,
    /// Hard mesh points imposed on the integrator.
    pub breakpoints: Vec<f64>,
    pub zeros: Vec<Zero>,
    pub near_zeros: Vec<Zero>,
    /// Largest scaled residual seen at the collocation points.
    pub max_residual: f64,
    pub zero_tol: f64,
}

impl Trajectory {
    pub(crate) fn from_repr(repr: Repr, breakpoints: Vec<f64>, max_residual: f64, zero_tol: f64) -> Trajectory {
        let sol = match &repr {
            Repr::Dense(s) => s,
            Repr::Exponential(e) => &e.state,
        };
        let (t1, horizon) = (sol.t_start, sol.t_end());
        let mut traj = Trajectory {
            repr,
            t1,
            horizon,
            breakpoints,
            zeros: Vec::new(),
            near_zeros: Vec::new(),
            max_residual,
            zero_tol,
        };
        let tol = zero_tol * traj.phi_max_abs().max(1.0);
        let rep = detect_zeros(&traj, tol);
        traj.zeros = rep.zeros;
        traj.near_zeros = rep.near_zeros;
        traj
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t1 && t <= self.horizon
    }

    /// `(φ(t), ψ(t))` for `t` in `[t1, horizon]`.
    pub fn eval(&self, t: f64) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Dense(s) => s.eval(t).map(|x| (x[0], x[1])),
            Repr::Exponential(e) => e.state.eval(t).map(|[y, big_f]| {
                let phi = e.scale * big_f.exp();
                (phi, y * phi)
            }),
        }
    }

    pub fn phi(&self, t: f64) -> Option<f64> {
        self.eval(t).map(|v| v.0)
    }

    pub fn psi(&self, t: f64) -> Option<f64> {
        self.eval(t).map(|v| v.1)
    }

    /// Time derivative of `(φ, ψ)` from the interpolant.
    pub fn deriv(&self, t: f64) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Dense(s) => s.deriv(t).map(|d| (d[0], d[1])),
            Repr::Exponential(e) => {
                let [y, big_f] = e.state.eval(t)?;
                let [dy, d_big_f] = e.state.deriv(t)?;
                let phi = e.scale * big_f.exp();
                Some((phi * d_big_f, (dy + y * d_big_f) * phi))
            }
        }
    }

    /// Accepted step boundaries.
    pub fn mesh(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(s) => s.mesh(),
            Repr::Exponential(e) => e.state.mesh(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.mesh().len().saturating_sub(1)
    }

    pub fn phi_max_abs(&self) -> f64 {
        let mesh = self.mesh();
        let mut m: f64 = 0.0;
        for w in mesh.windows(2) {
            for k in 0..4 {
                let t = w[0] + (w[1] - w[0]) * k as f64 / 4.0;
                if let Some(v) = self.phi(t) {
                    m = m.max(v.abs());
                }
            }
        }
        if let Some(&last) = mesh.last() {
            m = m.max(self.phi(last).unwrap_or(0.0).abs());
        }
        m
    }

    /// Sign-change zeros in `[a, b]`.
    pub fn zeros_in(&self, a: f64, b: f64) -> impl Iterator<Item = &Zero> {
        self.zeros.iter().filter(move |z| z.t >= a && z.t <= b)
    }

    pub fn zero_report(&self) -> ZeroReport {
        ZeroReport { zeros: self.zeros.clone(), near_zeros: self.near_zeros.clone(), horizon: self.horizon }
    }

    /// CSV with columns `t,phi,psi` at every mesh point and the midpoint of every step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,phi,psi")?;
        let mesh = self.mesh();
        for (i, &t) in mesh.iter().enumerate() {
            let mut row = |t: f64| -> io::Result<()> {
                let (phi, psi) = self.eval(t).unwrap_or((f64::NAN, f64::NAN));
                writeln!(w, "{t:?},{phi:?},{psi:?}")
            };
            row(t)?;
            if let Some(&next) = mesh.get(i + 1) {
                row(0.5 * (t + next))?;
            }
        }
        Ok(())
    }

    /// Trajectory as a [`ScalarFn`] for `φ`, valid on `[t1, horizon]`.
    pub fn phi_fn(&self) -> PhiFn<'_> {
        PhiFn(self)
    }
}

pub struct PhiFn<'a>(&'a Trajectory);

impl ScalarFn for PhiFn<'_> {
    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.0.phi(t).ok_or(EvalError::OutsideDomain { t })
    }
}

const SAMPLES_PER_STEP: usize = 8;

/// Sign changes of `φ` located by bisection on the dense output; dips of
/// `|φ|` below `zero_tol` without a sign change are reported separately.
/// The initial point is never counted.
pub fn detect_zeros(traj: &Trajectory, zero_tol: f64) -> ZeroReport {
    let mesh = traj.mesh();
    let mut pts = Vec::with_capacity(mesh.len() * SAMPLES_PER_STEP);
    for w in mesh.windows(2) {
        for k in 0..SAMPLES_PER_STEP {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / SAMPLES_PER_STEP as f64);
        }
    }
    if let Some(&last) = mesh.last() {
        pts.push(last);
    }
    let vals: Vec<f64> = pts.iter().map(|&t| traj.phi(t).unwrap_or(f64::NAN)).collect();
    let t_start = traj.t1;
    let skip_start = |t: f64| t <= t_start + 1e-12 * t_start.abs().max(1.0);

    let mut zeros: Vec<Zero> = Vec::new();
    let mut near: Vec<Zero> = Vec::new();
    let mut i = 0;
    while i + 1 < pts.len() {
        let (a, b) = (pts[i], pts[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            // Exact zero at a sample: look at the nearest non-zero neighbours.
            let mut j = i + 1;
            while j < pts.len() && vals[j] == 0.0 {
                j += 1;
            }
            let before = if i > 0 { vals[i - 1] } else { f64::NAN };
            let after = vals.get(j).copied().unwrap_or(f64::NAN);
            if !skip_start(a) {
                let kind = if before * after < 0.0 { ZeroKind::SignChange } else { ZeroKind::Tangency };
                let z = Zero { t: a, error_bound: 0.0, value: 0.0, kind };
                match kind {
                    ZeroKind::SignChange => zeros.push(z),
                    ZeroKind::Tangency => near.push(z),
                }
            }
            i = j.max(i + 1);
            continue;
        }
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = traj.phi(mid).unwrap_or(0.0);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            if !skip_start(t) {
                let value = traj.phi(t).unwrap_or(0.0);
                zeros.push(Zero { t, error_bound: 0.5 * (hi - lo), value, kind: ZeroKind::SignChange });
            }
        } else if fa.abs() < zero_tol && i > 0 && !skip_start(a) {
            let prev = vals[i - 1];
            if fa.abs() <= prev.abs() && fa.abs() <= fb.abs() && prev * fa > 0.0 {
                near.push(Zero { t: a, error_bound: b - a, value: fa, kind: ZeroKind::Tangency });
            }
        }
        i += 1;
    }
    ZeroReport { zeros, near_zeros: near, horizon: traj.horizon }
}
