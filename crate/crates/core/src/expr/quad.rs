//! Globally adaptive Gauss–Kronrod (7/15) quadrature with forced panel edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EvalError, PiecewiseFn, ScalarFn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("panel budget exhausted near t = {near} (estimated error {err:e}); the integrand may have a non-integrable singularity")]
    BudgetExhausted { near: f64, err: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Default absolute tolerance.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 20_000;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - h * x)?;
        let f2 = f(c + h * x)?;
        k += w * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    if !k.is_finite() {
        return Err(EvalError::NonFinite { t: c });
    }
    Ok(Panel { a, b, value: k * h, err: ((k - g) * h).abs() })
}

/// Integrate a closure over `[a, b]`. Every point of `breaks` inside the
/// interval becomes a panel edge, so jumps never straddle a panel.
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let p = gk15(&f, w[0], w[1])?;
        total += p.value;
        total_err += p.err;
        heap.push(p);
    }
    let mut panels = heap.len();
    while total_err > tol.max(4.0 * f64::EPSILON * total.abs()) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if panels >= MAX_PANELS || mid <= worst.a || mid >= worst.b {
            if worst.err <= tol {
                heap.push(worst);
                break;
            }
            return Err(QuadError::BudgetExhausted { near: mid, err: total_err });
        }
        let singular = |e: EvalError| match e {
            EvalError::NonFinite { t } => QuadError::BudgetExhausted { near: t, err: f64::INFINITY },
            e => QuadError::Eval(e),
        };
        let l = gk15(&f, worst.a, mid).map_err(singular)?;
        let r = gk15(&f, mid, worst.b).map_err(singular)?;
        total += l.value + r.value - worst.value;
        total_err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        panels += 1;
    }
    // Re-sum to shed the cancellation drift of the running total.
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Integrate any [`ScalarFn`] over `[a, b]`, using its breakpoints as panel edges.
pub fn quad_fn(f: &dyn ScalarFn, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    let breaks = if a < b { f.breakpoints_in(a, b) } else { Vec::new() };
    integrate(|t| f.eval(t), a, b, &breaks, tol)
}

/// `∫_a^b fn(t) dt` to absolute tolerance `tol`.
pub fn quad(f: &PiecewiseFn, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    quad_fn(f, a, b, tol)
}

/// Signed integral: `-∫_b^a` when `b < a`.
pub fn integrate_signed<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if b < a {
        Ok(-integrate(f, b, a, breaks, tol)?)
    } else {
        integrate(f, a, b, breaks, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    #[test]
    fn sine_squared_over_half_period() {
        let f = parse("sin(t)^2").unwrap();
        let v = quad(&f, 0.0, PI, 1e-10).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_integrand() {
        let f = parse("0").unwrap();
        assert_eq!(quad(&f, 0.0, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn step_coefficient() {
        let f = parse("piecewise (-inf, 1): 0 ; [1, inf): 2").unwrap();
        let v = quad(&f, 0.0, 3.0 * PI, 1e-10).unwrap();
        assert!((v - 2.0 * (3.0 * PI - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn rejects_reversed_interval() {
        let f = parse("1").unwrap();
        assert!(matches!(quad(&f, 1.0, 0.0, 1e-10), Err(QuadError::InvalidInterval { .. })));
        assert!((integrate_signed(|t| Ok(t), 1.0, 0.0, &[], 1e-12).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn singular_integrand_exhausts_budget() {
        let r = integrate(|t| Ok(1.0 / t), 0.0, 1.0, &[], 1e-10);
        assert!(matches!(r, Err(QuadError::BudgetExhausted { .. })));
    }

    #[test]
    fn integrable_endpoint_singularity_converges() {
        let v = integrate(|t: f64| Ok(1.0 / t.sqrt()), 0.0, 1.0, &[], 1e-8).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }
}
