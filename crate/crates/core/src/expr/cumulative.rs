//! Tabulated running integral `I(t) = ∫_a^t g` with cubic Hermite
//! interpolation between nodes.

use super::quad::{integrate, QuadError};
use super::{EvalError, ScalarFn};

#[derive(Debug, Clone)]
pub struct CumulativeIntegral {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// `g` just right of each node (unused at the last node).
    right: Vec<f64>,
    /// `g` just left of each node (unused at the first node).
    left: Vec<f64>,
}

impl CumulativeIntegral {
    /// Tabulate on `[a, b]` with node spacing at most `max_step`; every
    /// breakpoint of `g` becomes a node.
    pub fn new(g: &dyn ScalarFn, a: f64, b: f64, max_step: f64, tol: f64) -> Result<Self, QuadError> {
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(QuadError::InvalidInterval { a, b });
        }
        let mut edges = vec![a];
        edges.extend(g.breakpoints_in(a, b));
        edges.push(b);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut nodes = vec![a];
        for w in edges.windows(2) {
            let n = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
            for k in 1..=n {
                nodes.push(if k == n { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / n as f64 });
            }
        }
        let panel_tol = tol / nodes.len().max(1) as f64;
        let mut values = Vec::with_capacity(nodes.len());
        let mut right = Vec::with_capacity(nodes.len());
        let mut left = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        values.push(0.0);
        left.push(f64::NAN);
        for w in nodes.windows(2) {
            acc += integrate(|t| g.eval(t), w[0], w[1], &[], panel_tol)?;
            values.push(acc);
            right.push(g.eval(w[0])?);
            left.push(g.eval_left(w[1])?);
        }
        right.push(f64::NAN);
        Ok(CumulativeIntegral { nodes, values, right, left })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("nonempty"))
    }

    /// `∫_a^t g`; `None` outside the tabulated range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let (a, b) = self.domain();
        if !(t >= a && t <= b) {
            return None;
        }
        if self.nodes.len() == 1 {
            return Some(0.0);
        }
        let i = self.nodes.partition_point(|&x| x <= t).clamp(1, self.nodes.len() - 1) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(h00 * self.values[i] + h10 * h * self.right[i] + h01 * self.values[i + 1] + h11 * h * self.left[i + 1])
    }

    /// `∫_s^t g` for `s`, `t` in range.
    pub fn between(&self, s: f64, t: f64) -> Option<f64> {
        Some(self.eval(t)? - self.eval(s)?)
    }

    /// As a function of `t`, for use as a coefficient.
    pub fn as_fn(&self) -> impl Fn(f64) -> Result<f64, EvalError> + '_ {
        move |t| self.eval(t).ok_or(EvalError::OutsideDomain { t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn running_integral_of_smooth_and_step() {
        let g = parse("cos(t)").unwrap();
        let c = CumulativeIntegral::new(&g, 0.0, 10.0, 0.01, 1e-12).unwrap();
        for i in 0..=1000 {
            let t = i as f64 * 0.01 + 0.003f64.min(10.0 - i as f64 * 0.01);
            assert!((c.eval(t).unwrap() - t.sin()).abs() < 1e-10, "t={t}");
        }
        let g = parse("piecewise (-inf, 1): 0 ; [1, inf): 2").unwrap();
        let c = CumulativeIntegral::new(&g, 0.0, 3.0, 0.5, 1e-12).unwrap();
        assert!((c.eval(2.25).unwrap() - 2.5).abs() < 1e-12);
        assert!((c.between(0.5, 1.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(c.eval(3.5).is_none());
    }
}
