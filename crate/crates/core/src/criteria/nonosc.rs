//! Non-oscillation by comparison with a homogeneous equation that has a
//! zero-free solution.

use crate::expr::{integrate, EvalError, PiecewiseFn, DEFAULT_GRID_STEP};
use crate::integrator::{solve_cauchy, DelayTerm, EquationSpec, HistorySpec, SolveOptions, Trajectory, ZeroKind};
use crate::OscillationVerdict;

use super::report::{CriterionReport, Hypothesis, HypothesisStatus, Witness};
use super::{arguments_diverge, check_window, dominance, sign_exemption, CriteriaError};

/// Evidence that the comparison equation is nonoscillatory.
#[derive(Debug, Clone, PartialEq)]
pub enum NonoscWitness {
    /// A closed-form solution; its residual is checked on a fine grid.
    Expression(PiecewiseFn),
    /// Initial data to integrate; the first run without zeros in the
    /// second half of the window is accepted.
    Numeric(Vec<HistorySpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonoscOptions {
    pub grid_step: f64,
    /// Points of the residual grid for an expression witness.
    pub residual_points: usize,
    /// Residual bound, relative to the largest term of the equation.
    pub residual_tol: f64,
    pub solve: SolveOptions,
}

impl Default for NonoscOptions {
    fn default() -> Self {
        NonoscOptions { grid_step: DEFAULT_GRID_STEP, residual_points: 10_000, residual_tol: 1e-10, solve: SolveOptions::default() }
    }
}

/// Histories tried when no witness is supplied.
pub fn default_histories(t1: f64) -> Vec<HistorySpec> {
    let c = |v: f64| PiecewiseFn::constant(v);
    vec![
        HistorySpec::new(t1, c(1.0), 0.0),
        HistorySpec::new(t1, c(1.0), 1.0),
        HistorySpec::new(t1, c(1.0), -1.0),
        HistorySpec::new(t1, c(0.0), 1.0),
    ]
}

fn comparison_equation(eq: &EquationSpec, r1: &[PiecewiseFn]) -> EquationSpec {
    EquationSpec {
        f: PiecewiseFn::constant(0.0),
        terms: eq.terms.iter().zip(r1).map(|(d, r)| DelayTerm { r: r.clone(), alpha: d.alpha.clone() }).collect(),
        ..eq.clone()
    }
}

struct Residual {
    max_scaled: f64,
    worst_point: f64,
    l1: f64,
    min_abs: f64,
    sign_change: bool,
}

/// `(pφ')' + qφ' + Σ r_j φ(α_j)` for a closed-form `φ`, scaled by the
/// largest of its terms.
fn residual_at(eq: &EquationSpec, phi: &PiecewiseFn, t: f64) -> Result<(f64, f64), EvalError> {
    let p = eq.p.eval_jet(t)?;
    let u = phi.eval_jet(t)?;
    let q = eq.q.eval(t)?;
    let mut parts = vec![p.d1 * u.d1, p.v * u.d2, q * u.d1];
    for d in &eq.terms {
        let r = d.r.eval(t)?;
        if r != 0.0 {
            parts.push(r * phi.eval(d.alpha.eval(t)?)?);
        }
    }
    let sum: f64 = parts.iter().sum();
    let scale = parts.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok((sum, scale))
}

fn expression_residual(eq: &EquationSpec, phi: &PiecewiseFn, window: (f64, f64), n: usize) -> Result<Residual, CriteriaError> {
    let (a, b) = window;
    let n = n.max(2);
    let mut out = Residual { max_scaled: 0.0, worst_point: a, l1: 0.0, min_abs: f64::INFINITY, sign_change: false };
    let mut first_sign = 0.0;
    for i in 0..n {
        let t = a + (b - a) * i as f64 / (n - 1) as f64;
        let (res, scale) = residual_at(eq, phi, t)?;
        if res.abs() / scale > out.max_scaled {
            out.max_scaled = res.abs() / scale;
            out.worst_point = t;
        }
        let v = phi.eval(t)?;
        out.min_abs = out.min_abs.min(v.abs());
        if first_sign == 0.0 {
            first_sign = v.signum();
        } else if v * first_sign < 0.0 {
            out.sign_change = true;
        }
    }
    let mut breaks: Vec<f64> = phi.breakpoints().into_iter().chain(eq.p.breakpoints()).filter(|&x| x > a && x < b).collect();
    for d in &eq.terms {
        breaks.extend(d.r.breakpoints().into_iter().chain(d.alpha.breakpoints()).filter(|&x| x > a && x < b));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    out.l1 = integrate(|t| residual_at(eq, phi, t).map(|(r, _)| r.abs()), a, b, &breaks, 1e-13)?;
    Ok(out)
}

/// First history whose solution of `eq` has no sign change on
/// `[from, horizon]`.
pub fn find_zero_free(
    eq: &EquationSpec,
    histories: &[HistorySpec],
    horizon: f64,
    from: f64,
    opts: &SolveOptions,
) -> Result<Option<(HistorySpec, Trajectory)>, CriteriaError> {
    let mut last_err = None;
    for h in histories {
        match solve_cauchy(eq, h, horizon, opts) {
            Ok(traj) => {
                let hit = traj.zeros.iter().any(|z| z.kind == ZeroKind::SignChange && z.t >= from);
                if !hit && traj.horizon >= horizon {
                    return Ok(Some((h.clone(), traj)));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match last_err {
        Some(e) if histories.len() == 1 => Err(e.into()),
        _ => Ok(None),
    }
}

/// Non-oscillation of `eq` from a nonoscillatory comparison equation with
/// coefficients `r1` (same `p`, `q`, `α_j`, no forcing).
pub fn check_nonoscillation_thm31(
    eq: &EquationSpec,
    r1: &[PiecewiseFn],
    witness: &NonoscWitness,
    window: (f64, f64),
    opts: &NonoscOptions,
) -> Result<CriterionReport, CriteriaError> {
    run_thm31("thm31", eq, r1, witness, window, opts)
}

fn run_thm31(
    id: &str,
    eq: &EquationSpec,
    r1: &[PiecewiseFn],
    witness: &NonoscWitness,
    window: (f64, f64),
    opts: &NonoscOptions,
) -> Result<CriterionReport, CriteriaError> {
    if r1.len() != eq.terms.len() {
        return Err(CriteriaError::ShapeMismatch { expected: eq.terms.len(), found: r1.len() });
    }
    check_window(window)?;
    let step = opts.grid_step;
    let r: Vec<&PiecewiseFn> = eq.terms.iter().map(|d| &d.r).collect();
    let r1_ref: Vec<&PiecewiseFn> = r1.iter().collect();
    let alphas: Vec<&PiecewiseFn> = eq.terms.iter().map(|d| &d.alpha).collect();
    let zero = PiecewiseFn::constant(0.0);

    let mut rep = CriterionReport::new(id);
    rep.hypotheses.push(dominance("1", &r1_ref, &r, window, step)?);
    rep.hypotheses.push(sign_exemption("2", &r, &r1_ref, &alphas, window, step)?);
    rep.hypotheses.push(dominance("4", &[&eq.f], &[&zero], window, step)?);
    let h5 = arguments_diverge("5", &alphas, window, step)?;
    rep.hypotheses.push(h5);
    rep.caveat("coefficient conditions sampled on a grid over the window only");
    rep.caveat("argument divergence checked as a bounded lag on a finite window");

    let cmp = comparison_equation(eq, r1);
    let mut exact = false;
    match witness {
        NonoscWitness::Expression(phi) => {
            let res = expression_residual(&cmp, phi, window, opts.residual_points)?;
            let zero_free = res.min_abs > 0.0 && !res.sign_change;
            let ok = res.max_scaled <= opts.residual_tol && res.l1 <= opts.residual_tol && zero_free;
            let status = if ok { HypothesisStatus::Verified } else { HypothesisStatus::Violated };
            let mut h = Hypothesis::new("witness", status).with_detail(format!(
                "closed-form solution of the comparison equation: max scaled residual {:e}, residual L1 {:e}, min |phi| {:e}",
                res.max_scaled, res.l1, res.min_abs
            ));
            h.worst_point = Some(res.worst_point);
            h.margin = Some(opts.residual_tol - res.max_scaled);
            rep.hypotheses.push(h);
            rep.witnesses.push(Witness::Expression {
                expr: phi.to_string(),
                max_residual: res.max_scaled,
                residual_l1: res.l1,
                min_abs: res.min_abs,
            });
            exact = ok;
        }
        NonoscWitness::Numeric(histories) => {
            let from = 0.5 * (window.0 + window.1);
            let found = find_zero_free(&cmp, histories, window.1, from, &opts.solve)?;
            let status = if found.is_some() { HypothesisStatus::Verified } else { HypothesisStatus::NotVerifiable };
            let detail = match &found {
                Some(_) => "integrated solution of the comparison equation has no sign change on the second half of the window",
                None => "no tried history gave a solution without sign changes on the second half of the window",
            };
            let mut h = Hypothesis::new("witness", status).with_detail(detail);
            if let Some((hist, traj)) = &found {
                h.worst_point = Some(traj.horizon);
                rep.witnesses.push(Witness::Trajectory {
                    theta: hist.theta.to_string(),
                    zeta: hist.zeta,
                    horizon: traj.horizon,
                    zeros: traj.zeros.len(),
                    last_zero: traj.zeros.last().map(|z| z.t),
                });
            }
            rep.hypotheses.push(h);
        }
    }

    rep.conclude(if exact {
        OscillationVerdict::CertifiedNonoscillatory
    } else {
        OscillationVerdict::NumericNonoscillatory { horizon: window.1 }
    });
    if !exact && rep.verdict != OscillationVerdict::Inconclusive {
        rep.caveat("comparison equation judged nonoscillatory from a finite integration only");
    }
    Ok(rep)
}

/// Non-oscillation via the comparison equation with coefficients `r_j⁺`,
/// searched numerically from several histories.
pub fn check_nonoscillation_cor31(
    eq: &EquationSpec,
    window: (f64, f64),
    histories: Option<Vec<HistorySpec>>,
    opts: &NonoscOptions,
) -> Result<CriterionReport, CriteriaError> {
    let r1: Vec<PiecewiseFn> = eq.terms.iter().map(|d| d.r.positive_part()).collect();
    let t1 = window.0.max(eq.t0);
    let witness = NonoscWitness::Numeric(histories.unwrap_or_else(|| default_histories(t1)));
    run_thm31("cor31", eq, &r1, &witness, window, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::integrator::identity;

    fn pw(s: &str) -> PiecewiseFn {
        parse(s).unwrap()
    }

    fn forced() -> EquationSpec {
        EquationSpec {
            p: pw("1"),
            q: pw("0"),
            f: pw("cos(sin(ln(1+t)))"),
            terms: vec![
                DelayTerm { r: pw("sin(t)^2"), alpha: pw("t - 1") },
                DelayTerm { r: pw("cos(t)^2"), alpha: pw("t - 2") },
                DelayTerm { r: pw("-1"), alpha: identity() },
            ],
            t0: 0.0,
        }
    }

    #[test]
    fn constant_witness_certifies() {
        let eq = forced();
        let r1: Vec<_> = eq.terms.iter().map(|d| d.r.clone()).collect();
        let rep = check_nonoscillation_thm31(&eq, &r1, &NonoscWitness::Expression(pw("1")), (0.0, 100.0), &NonoscOptions::default())
            .unwrap();
        assert!(rep.all_verified(), "{:?}", rep.hypotheses);
        assert_eq!(rep.verdict, OscillationVerdict::CertifiedNonoscillatory);
    }

    #[test]
    fn negative_forcing_is_flagged() {
        let mut eq = forced();
        eq.f = pw("sin(t)");
        let r1: Vec<_> = eq.terms.iter().map(|d| d.r.clone()).collect();
        let rep = check_nonoscillation_thm31(&eq, &r1, &NonoscWitness::Expression(pw("1")), (0.0, 20.0), &NonoscOptions::default())
            .unwrap();
        assert_eq!(rep.hypothesis("4").unwrap().status, HypothesisStatus::Violated);
        assert_eq!(rep.verdict, OscillationVerdict::Inconclusive);
    }

    #[test]
    fn shape_mismatch() {
        let eq = forced();
        let err = check_nonoscillation_thm31(&eq, &[pw("1")], &NonoscWitness::Expression(pw("1")), (0.0, 1.0), &NonoscOptions::default());
        assert!(matches!(err, Err(CriteriaError::ShapeMismatch { expected: 3, found: 1 })));
    }

    #[test]
    fn growing_lag_is_not_verifiable() {
        let eq = EquationSpec {
            p: pw("1"),
            q: pw("0"),
            f: pw("0"),
            terms: vec![DelayTerm { r: pw("-1"), alpha: pw("t/2") }],
            t0: 0.0,
        };
        let rep = check_nonoscillation_thm31(&eq, &[pw("-1")], &NonoscWitness::Expression(pw("1")), (0.0, 10.0), &NonoscOptions::default())
            .unwrap();
        assert_eq!(rep.hypothesis("5").unwrap().status, HypothesisStatus::NotVerifiable);
        assert!(!rep.verdict.is_certified());
    }
}
