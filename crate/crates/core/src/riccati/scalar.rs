//! Ordering of solutions of two scalar Riccati equations
//! `y' + a y² + b y + c = 0` and `y' + a₁ y² + b₁ y + c₁ = 0`.

use crate::expr::{integrate, EvalError, PiecewiseFn, ScalarFn};
use crate::integrator::engine::{integrate as run, DelaySystem, EngineOptions, EngineStatus, Past, Segment};
use crate::integrator::SolveError;

use super::comparison::{ComparisonReport, ConditionCheck};
use super::{BlowUp, Direction, RiccatiError, Y_MAX};

/// Two scalar Riccati equations on `[t1, t2]` with the data of the
/// comparison statement. `η₀` and `η₁` are taken as the solutions of the
/// equations themselves, which are in particular solutions of the
/// corresponding differential inequalities; the compared solution is
/// `y₁ = η₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRiccatiPair {
    pub a: PiecewiseFn,
    pub b: PiecewiseFn,
    pub c: PiecewiseFn,
    pub a1: PiecewiseFn,
    pub b1: PiecewiseFn,
    pub c1: PiecewiseFn,
    pub interval: (f64, f64),
    pub y0: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub lambda: f64,
}

const GRID: usize = 256;

struct PairSystem<'a>(&'a ScalarRiccatiPair);

impl DelaySystem<4> for PairSystem<'_> {
    fn rhs(&self, t: f64, x: &[f64; 4], _past: &Past<'_, 4>) -> Result<[f64; 4], EvalError> {
        let s = self.0;
        let (a, b, c) = (s.a.eval(t)?, s.b.eval(t)?, s.c.eval(t)?);
        let (a1, b1, c1) = (s.a1.eval(t)?, s.b1.eval(t)?, s.c1.eval(t)?);
        let [y0, eta0, eta1, _] = *x;
        Ok([
            -(a * y0 * y0 + b * y0 + c),
            -(a * eta0 * eta0 + b * eta0 + c),
            -(a1 * eta1 * eta1 + b1 * eta1 + c1),
            a1 * (eta0 + eta1) + b1,
        ])
    }

    fn history(&self, s: f64) -> Result<[f64; 4], EvalError> {
        Err(EvalError::OutsideDomain { t: s })
    }
}

fn grid(a: f64, b: f64) -> Vec<f64> {
    (0..GRID).map(|i| a + (b - a) * i as f64 / (GRID - 1) as f64).collect()
}

/// Check the integral hypothesis on a 256-point grid, integrate both
/// equations and report the ordering margin `min (y₁ - y₀)`.
pub fn verify_scalar_comparison(pair: &ScalarRiccatiPair, tol: f64) -> Result<ComparisonReport, RiccatiError> {
    let (t1, t2) = pair.interval;
    if !(t2 > t1) {
        return Err(SolveError::InvalidHorizon { t1, horizon: t2 }.into());
    }
    let pts = grid(t1, t2);
    let mut conditions = Vec::new();

    let mut worst_a1 = (t1, f64::INFINITY);
    for &t in &pts {
        let v = pair.a1.eval(t)?;
        if v < worst_a1.1 {
            worst_a1 = (t, v);
        }
    }
    conditions.push(ConditionCheck::at("a1_nonnegative", worst_a1.1 >= -1e-12, worst_a1.0, worst_a1.1));
    conditions.push(ConditionCheck::scalar("eta0_above_y0", pair.eta0 >= pair.y0, pair.eta0 - pair.y0));
    conditions.push(ConditionCheck::scalar("eta1_above_y0", pair.eta1 >= pair.y0, pair.eta1 - pair.y0));
    let lam_margin = (pair.lambda - pair.y0).min(pair.eta1 - pair.lambda);
    conditions.push(ConditionCheck::scalar("lambda_in_range", lam_margin >= 0.0, lam_margin));

    let mut marks = Vec::new();
    for f in [&pair.a, &pair.b, &pair.c, &pair.a1, &pair.b1, &pair.c1] {
        marks.extend(f.breakpoints_in(t1, t2));
    }
    let mut opts = EngineOptions::with_tol(0.02 * tol.min(1e-9));
    opts.blowup = Some((3, Y_MAX));
    let out = run(&PairSystem(pair), t1, [pair.y0, pair.eta0, pair.eta1, 0.0], t2, &marks, &opts, &mut |_: &Segment<4>| {
        false
    })
    .map_err(SolveError::from)?;
    let sol = out.sol;
    let reached = sol.t_end();
    let mut blowups = Vec::new();
    if let EngineStatus::BlowUp { t, value, .. } = out.status {
        let n = sol.segments.len();
        let last_steps = sol.segments[n.saturating_sub(5)..].iter().map(|s| s.h).collect();
        let direction = if value > 0.0 { Direction::PlusInfinity } else { Direction::MinusInfinity };
        blowups.push(BlowUp { t, direction, value, last_steps });
    }
    conditions.push(ConditionCheck::at("solutions_exist", blowups.is_empty(), reached, reached - t2));

    // λ - y₀(t₁) + ∫ exp(E) [(a - a₁) y₀² + (b - b₁) y₀ + c - c₁] >= 0 on the grid.
    let integrand = |t: f64| -> Result<f64, EvalError> {
        let [y0, _, _, e] = sol.eval(t).ok_or(EvalError::OutsideDomain { t })?;
        let da = pair.a.eval(t)? - pair.a1.eval(t)?;
        let db = pair.b.eval(t)? - pair.b1.eval(t)?;
        let dc = pair.c.eval(t)? - pair.c1.eval(t)?;
        Ok(e.exp() * (da * y0 * y0 + db * y0 + dc))
    };
    let mesh = sol.mesh();
    let mut acc = pair.lambda - pair.y0;
    let mut worst_h = (t1, acc);
    let mut prev = t1;
    for &t in pts.iter().skip(1).filter(|&&t| t <= reached) {
        let breaks: Vec<f64> = mesh.iter().copied().filter(|&m| m > prev && m < t).collect();
        acc += integrate(integrand, prev, t, &breaks, 1e-13)?;
        if acc < worst_h.1 {
            worst_h = (t, acc);
        }
        prev = t;
    }
    conditions.push(ConditionCheck::at("integral_hypothesis", worst_h.1 >= -tol, worst_h.0, worst_h.1));

    let mut check_pts: Vec<f64> = pts.iter().copied().filter(|&t| t <= reached).collect();
    check_pts.extend(mesh.iter().copied());
    let mut margin = (t1, f64::INFINITY);
    for t in check_pts {
        if let Some([y0, _, y1, _]) = sol.eval(t) {
            if y1 - y0 < margin.1 {
                margin = (t, y1 - y0);
            }
        }
    }
    let hyps_ok = conditions.iter().all(|c| c.holds);
    Ok(ComparisonReport {
        interval: (t1, t2),
        reached,
        conditions,
        ordering_margin: margin.1,
        ordering_worst_point: margin.0,
        blowups,
        conclusion: hyps_ok && margin.1 >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pw(s: &str) -> PiecewiseFn {
        parse(s).unwrap()
    }

    fn pair(c: &str, c1: &str, interval: (f64, f64)) -> ScalarRiccatiPair {
        ScalarRiccatiPair {
            a: pw("1"),
            b: pw("0"),
            c: pw(c),
            a1: pw("1"),
            b1: pw("0"),
            c1: pw(c1),
            interval,
            y0: 0.0,
            eta0: 0.0,
            eta1: 0.0,
            lambda: 0.0,
        }
    }

    #[test]
    fn identical_triples_have_zero_margin() {
        let rep = verify_scalar_comparison(&pair("1 + sin(t)", "1 + sin(t)", (0.0, 1.0)), 1e-9).unwrap();
        assert!(rep.conclusion);
        assert_eq!(rep.ordering_margin, 0.0);
    }

    #[test]
    fn tangent_below_zero() {
        let rep = verify_scalar_comparison(&pair("1", "0", (0.0, 1.0)), 1e-9).unwrap();
        assert!(rep.conclusion, "{rep:?}");
        // y₁ ≡ 0 and y₀ = -tan t, so the margin is smallest at t = 0.
        assert!(rep.ordering_margin.abs() < 1e-12);
        assert!(rep.conditions.iter().all(|c| c.holds));
    }

    #[test]
    fn reversed_pair_fails_hypothesis() {
        let rep = verify_scalar_comparison(&pair("0", "1", (0.0, 1.0)), 1e-9).unwrap();
        let h = rep.conditions.iter().find(|c| c.id == "integral_hypothesis").unwrap();
        assert!(!h.holds);
        assert!(!rep.conclusion);
    }
}
