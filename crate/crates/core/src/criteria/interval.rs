//! Oscillation on a bounded interval for `(pφ')' + Σ r_k φ(β_k(t)) = f`,
//! with advanced or retarded `β_k`, via two comparison ODEs on `[t1, t2]`
//! and `[t3, t4]`.

use crate::expr::{CumulativeIntegral, EvalError, FnCoefficient, PiecewiseFn, ScalarFn, DEFAULT_GRID_STEP, SIGN_SLACK};
use crate::integrator::{interval_oscillatory, sample_grid, DEFAULT_SCAN_POINTS};
use crate::OscillationVerdict;

use super::report::{CriterionReport, Hypothesis, HypothesisStatus, OmegaSets, Witness};
use super::CriteriaError;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOscInstance {
    pub p: PiecewiseFn,
    /// `(r_k, β_k)`.
    pub terms: Vec<(PiecewiseFn, PiecewiseFn)>,
    /// `t1 < t2 <= t3 < t4`.
    pub partition: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOscOptions {
    pub eps_schedule: Vec<f64>,
    pub scan_points: usize,
    pub tol: f64,
    pub grid_step: f64,
}

impl Default for IntervalOscOptions {
    fn default() -> Self {
        IntervalOscOptions {
            eps_schedule: (0..=8).map(|i| 0.5f64.powi(i)).collect(),
            scan_points: DEFAULT_SCAN_POINTS,
            tol: 1e-9,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

fn close(a: f64, b: f64) -> f64 {
    SIGN_SLACK * a.abs().max(b.abs()).max(1.0)
}

impl IntervalOscInstance {
    pub fn validate(&self) -> Result<(), CriteriaError> {
        let [t1, t2, t3, t4] = self.partition;
        if !(self.partition.iter().all(|x| x.is_finite()) && t1 < t2 && t2 <= t3 && t3 < t4) {
            return Err(CriteriaError::InvalidPartition(self.partition));
        }
        Ok(())
    }

    /// Index sets and bounds, sampled on the grid. Points where `r_k`
    /// vanishes do not constrain membership, since the term is absent there.
    pub fn sets(&self, step: f64) -> Result<OmegaSets, CriteriaError> {
        self.validate()?;
        let [t1, t2, t3, t4] = self.partition;
        let first = sample_grid(t1, t2, step);
        let second = sample_grid(t3, t4, step);
        let member = |k: usize, grid: &[f64], pred: &dyn Fn(f64, f64) -> bool| -> Result<bool, EvalError> {
            let (r, beta) = &self.terms[k];
            for &t in grid {
                if r.eval(t)? != 0.0 && !pred(t, beta.eval(t)?) {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let mut sets = OmegaSets {
            omega_plus: Vec::new(),
            omega1_minus: Vec::new(),
            omega2_minus: Vec::new(),
            big_t1: t1,
            big_t2: t4,
            t2_plus: None,
            t3_minus: None,
        };
        for k in 0..self.terms.len() {
            if member(k, &first, &|t, b| b >= t - close(t, b))? {
                sets.omega_plus.push(k + 1);
            }
            if member(k, &first, &|t, b| b >= t1 - close(t1, b) && b <= t + close(t, b))? {
                sets.omega1_minus.push(k + 1);
            }
            if member(k, &second, &|t, b| b <= t + close(t, b))? {
                sets.omega2_minus.push(k + 1);
            }
        }
        for (_, beta) in &self.terms {
            for t in sample_grid(t1, t4, step) {
                let b = beta.eval(t)?;
                sets.big_t1 = sets.big_t1.min(b);
                sets.big_t2 = sets.big_t2.max(b);
            }
        }
        for &k in &sets.omega_plus {
            let (r, beta) = &self.terms[k - 1];
            for &t in &first {
                if r.eval(t)? != 0.0 {
                    let b = beta.eval(t)?;
                    sets.t2_plus = Some(sets.t2_plus.map_or(b, |x: f64| x.max(b)));
                }
            }
        }
        for &k in &sets.omega2_minus {
            let (r, beta) = &self.terms[k - 1];
            for &t in &second {
                if r.eval(t)? != 0.0 {
                    let b = beta.eval(t)?;
                    sets.t3_minus = Some(sets.t3_minus.map_or(b, |x: f64| x.min(b)));
                }
            }
        }
        Ok(sets)
    }

    fn breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = self.p.breakpoints_in(a, b);
        for (r, beta) in &self.terms {
            out.extend(r.breakpoints_in(a, b));
            out.extend(beta.breakpoints_in(a, b));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Worst value of `min_k r_k` on `[T1, T2]`.
    fn min_coefficient(&self, sets: &OmegaSets, step: f64) -> Result<Option<(usize, f64, f64)>, EvalError> {
        let mut worst: Option<(usize, f64, f64)> = None;
        for t in sample_grid(sets.big_t1, sets.big_t2, step) {
            for (k, (r, _)) in self.terms.iter().enumerate() {
                let v = r.eval(t)?;
                if worst.map_or(true, |w| v < w.2) {
                    worst = Some((k + 1, t, v));
                }
            }
        }
        Ok(worst)
    }
}

/// Effective coefficient of the first comparison ODE on `[t1, t2]`:
///
/// ```text
/// Σ_{ω₊} r_k(t) exp{∫_t^{β_k(t)} (1/p(τ)) ∫_τ^{t2} Σ_{ω₊} r_k(s) ds dτ}
///   + Σ_{ω₁⁻} r_k(t) (P(β_k(t)) + ε) / (P(t) + ε),   P(t) = ∫_{t1}^t dτ/p.
/// ```
///
/// A term in both sets (`β_k(t) = t` where `r_k ≠ 0`) is counted once; both
/// expressions then reduce to `r_k(t)`.
pub struct ComparisonCoefficient {
    terms: Vec<(PiecewiseFn, PiecewiseFn, bool)>,
    inv_p: CumulativeIntegral,
    exponent: Option<CumulativeIntegral>,
    t1: f64,
    eps: f64,
    domain: (f64, f64),
    breaks: Vec<f64>,
}

impl ScalarFn for ComparisonCoefficient {
    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let (a, b) = self.domain;
        if !(t >= a && t <= b) {
            return Err(EvalError::OutsideDomain { t });
        }
        let outside = |s: f64| EvalError::OutsideDomain { t: s };
        let mut acc = 0.0;
        for (r, beta, plus) in &self.terms {
            let rv = r.eval(t)?;
            if rv == 0.0 {
                continue;
            }
            let bt = beta.eval(t)?;
            if *plus {
                let g = self.exponent.as_ref().expect("exponent table for advanced terms");
                acc += rv * g.between(t, bt).ok_or_else(|| outside(bt))?.exp();
            } else {
                let num = self.inv_p.between(self.t1, bt).ok_or_else(|| outside(bt))? + self.eps;
                let den = self.inv_p.between(self.t1, t).ok_or_else(|| outside(t))? + self.eps;
                acc += rv * num / den;
            }
        }
        Ok(acc)
    }

    fn breakpoints_in(&self, a: f64, b: f64) -> Vec<f64> {
        self.breaks.iter().copied().filter(|&x| x > a && x < b).collect()
    }
}

impl ComparisonCoefficient {
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Build the first comparison coefficient for a given `ε > 0`.
pub fn build_comparison_coefficient(inst: &IntervalOscInstance, eps: f64, grid_step: f64) -> Result<ComparisonCoefficient, CriteriaError> {
    let sets = inst.sets(grid_step)?;
    build_with_sets(inst, &sets, eps, grid_step)
}

fn build_with_sets(inst: &IntervalOscInstance, sets: &OmegaSets, eps: f64, grid_step: f64) -> Result<ComparisonCoefficient, CriteriaError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CriteriaError::InvalidEpsilon(eps));
    }
    if sets.omega_plus.is_empty() && sets.omega1_minus.is_empty() {
        return Err(CriteriaError::EmptyFirstSets);
    }
    if let Some((term, t, value)) = inst.min_coefficient(sets, grid_step)? {
        if value < -SIGN_SLACK {
            return Err(CriteriaError::NegativeCoefficient { term, t, value });
        }
    }
    let [t1, t2, _, _] = inst.partition;
    let (lo, hi) = (sets.big_t1.min(t1), sets.big_t2.max(t2));
    let span_step = ((hi - lo) / 4000.0).clamp(1e-4, 1e-2);
    let tol = 1e-12;
    let p = &inst.p;
    let inv_p = CumulativeIntegral::new(
        &FnCoefficient::new(|t| Ok(1.0 / p.eval(t)?), inst.breaks(lo, hi)),
        lo,
        hi,
        span_step,
        tol,
    )?;

    let plus: Vec<usize> = sets.omega_plus.iter().map(|k| k - 1).collect();
    let exponent = if plus.is_empty() {
        None
    } else {
        let sum_r = FnCoefficient::new(
            |t| plus.iter().try_fold(0.0, |acc, &k| Ok(acc + inst.terms[k].0.eval(t)?)),
            inst.breaks(lo, hi),
        );
        let cum_r = CumulativeIntegral::new(&sum_r, lo, hi, span_step, tol)?;
        let inner = FnCoefficient::new(
            |tau| {
                let s = cum_r.between(tau, t2).ok_or(EvalError::OutsideDomain { t: tau })?;
                Ok(s / p.eval(tau)?)
            },
            inst.breaks(lo, hi),
        );
        Some(CumulativeIntegral::new(&inner, lo, hi, span_step, tol)?)
    };

    let terms = inst
        .terms
        .iter()
        .enumerate()
        .filter_map(|(k, (r, beta))| {
            let in_plus = sets.omega_plus.contains(&(k + 1));
            let in_minus = sets.omega1_minus.contains(&(k + 1));
            (in_plus || in_minus).then(|| (r.clone(), beta.clone(), in_plus))
        })
        .collect();
    Ok(ComparisonCoefficient { terms, inv_p, exponent, t1, eps, domain: (t1, t2), breaks: inst.breaks(t1, t2) })
}

/// Check the four conditions of the interval criterion. On success every
/// solution of the equation vanishes somewhere in `[T1, T2]`.
pub fn check_interval_osc_thm22(inst: &IntervalOscInstance, opts: &IntervalOscOptions) -> Result<CriterionReport, CriteriaError> {
    let step = opts.grid_step;
    let sets = inst.sets(step)?;
    if sets.omega2_minus.is_empty() {
        return Err(CriteriaError::EmptySecondSet);
    }
    if sets.omega_plus.is_empty() && sets.omega1_minus.is_empty() {
        return Err(CriteriaError::EmptyFirstSets);
    }
    let [t1, t2, t3, t4] = inst.partition;
    let mut rep = CriterionReport::new("thm22");
    rep.witnesses.push(Witness::Sets { sets: sets.clone() });

    // a) r_k >= 0 on [T1, T2].
    let worst = inst.min_coefficient(&sets, step)?;
    let a_ok = worst.map_or(true, |w| w.2 >= -SIGN_SLACK);
    rep.hypotheses.push(Hypothesis::from_margin("a", worst.map(|w| (w.1, w.2)), SIGN_SLACK));

    // b) t2⁺ <= t3⁻.
    let b = match (sets.t2_plus, sets.t3_minus) {
        (Some(hi), Some(lo)) => {
            let mut h = Hypothesis::from_margin("b", Some((hi, lo - hi)), close(hi, lo));
            h.worst_point = Some(hi);
            h
        }
        _ => Hypothesis::new("b", HypothesisStatus::Verified).with_detail("vacuous: no advanced term is active on [t1, t2]"),
    };
    rep.hypotheses.push(b);

    // c) first comparison ODE oscillatory on [t1, t2] for every sampled ε.
    if a_ok {
        let mut failed = None;
        for &eps in &opts.eps_schedule {
            let coef = build_with_sets(inst, &sets, eps, step)?;
            let osc = interval_oscillatory(&inst.p, &coef, (t1, t2), opts.scan_points, opts.tol)?;
            rep.witnesses.push(Witness::ConjugatePair {
                equation: "first".into(),
                interval: (t1, t2),
                epsilon: Some(eps),
                pair: osc.witness,
            });
            if !osc.oscillatory {
                failed = Some(eps);
                break;
            }
        }
        let eps_max = opts.eps_schedule.iter().copied().fold(f64::NAN, f64::max);
        let h = match (failed, opts.eps_schedule.is_empty()) {
            (_, true) => Hypothesis::new("c", HypothesisStatus::NotVerifiable).with_detail("empty epsilon schedule"),
            (Some(eps), _) => Hypothesis::new("c", HypothesisStatus::Violated)
                .with_detail(format!("no conjugate pair in [{t1}, {t2}] for epsilon = {eps}")),
            (None, _) => Hypothesis::new("c", HypothesisStatus::Verified).with_detail(format!(
                "conjugate pairs found for {} sampled epsilon values in (0, {eps_max}]",
                opts.eps_schedule.len()
            )),
        };
        rep.hypotheses.push(h);
        rep.caveat("the condition for all epsilon in (0, eps0) is checked on a finite sample of epsilon values");
    } else {
        rep.hypotheses.push(
            Hypothesis::new("c", HypothesisStatus::NotVerifiable).with_detail("comparison coefficient undefined while a) fails"),
        );
    }

    // d) second comparison ODE oscillatory on [t3, t4].
    let minus: Vec<usize> = sets.omega2_minus.iter().map(|k| k - 1).collect();
    let sum_r = FnCoefficient::new(
        |t| minus.iter().try_fold(0.0, |acc, &k| Ok(acc + inst.terms[k].0.eval(t)?)),
        inst.breaks(t3, t4),
    );
    let osc = interval_oscillatory(&inst.p, &sum_r, (t3, t4), opts.scan_points, opts.tol)?;
    rep.witnesses.push(Witness::ConjugatePair { equation: "second".into(), interval: (t3, t4), epsilon: None, pair: osc.witness });
    rep.hypotheses.push(if osc.oscillatory {
        let mut h = Hypothesis::new("d", HypothesisStatus::Verified);
        h.worst_point = osc.witness.map(|w| w.tau2);
        h
    } else {
        Hypothesis::new("d", HypothesisStatus::Violated)
            .with_detail(format!("no conjugate pair in [{t3}, {t4}] after {} start points", osc.starts_scanned))
    });

    rep.conclude(OscillationVerdict::CertifiedOscillatoryOn { a: sets.big_t1, b: sets.big_t2 });
    if rep.verdict.is_certified() {
        rep.witnesses.push(Witness::IntervalOscillation {
            interval: (t1, t4),
            on: (sets.big_t1, sets.big_t2),
            via: "comparison ODEs".into(),
        });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{integrate, parse};
    use std::f64::consts::PI;

    fn pw(s: &str) -> PiecewiseFn {
        parse(s).unwrap()
    }

    fn step_instance(l: usize) -> IntervalOscInstance {
        let base = 3.0 * PI * l as f64;
        let r = pw(&format!("2*ind({}, inf)", base + 1.0));
        IntervalOscInstance {
            p: pw("1"),
            terms: vec![(r, pw("t - 0.5"))],
            partition: [base + 0.5, base + 2.0 * PI + 0.5, base + 2.0 * PI + 1.0, base + 3.0 * PI],
        }
    }

    #[test]
    fn sets_and_bounds_of_step_instance() {
        let inst = step_instance(1);
        let sets = inst.sets(1e-2).unwrap();
        assert!(sets.omega_plus.is_empty());
        assert_eq!(sets.omega1_minus, vec![1]);
        assert_eq!(sets.omega2_minus, vec![1]);
        assert!(sets.big_t1 >= 3.0 * PI - 1e-12);
        assert!(sets.big_t2 <= 6.0 * PI + 1e-12);
    }

    #[test]
    fn ratio_matches_direct_quadrature() {
        let inst = step_instance(1);
        let coef = build_comparison_coefficient(&inst, 0.1, 1e-2).unwrap();
        let t = 3.0 * PI + 2.0;
        let t1 = inst.partition[0];
        let num = integrate(|_| Ok(1.0), t1, t - 0.5, &[], 1e-14).unwrap() + 0.1;
        let den = integrate(|_| Ok(1.0), t1, t, &[], 1e-14).unwrap() + 0.1;
        assert!((coef.eval(t).unwrap() - 2.0 * num / den).abs() < 1e-10);
        assert!((coef.eval(t).unwrap() - 2.0 * 1.1 / 1.6).abs() < 1e-10);
    }

    #[test]
    fn undeviated_terms_collapse() {
        let inst = IntervalOscInstance {
            p: pw("1 + t/10"),
            terms: vec![(pw("1 + sin(t)^2"), pw("t")), (pw("0.5"), pw("t"))],
            partition: [0.0, 2.0, 2.0, 4.0],
        };
        for eps in [1.0, 0.01] {
            let coef = build_comparison_coefficient(&inst, eps, 1e-2).unwrap();
            for i in 0..=20 {
                let t = 0.1 * i as f64;
                let want = 1.5 + t.sin().powi(2);
                assert!((coef.eval(t).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn advanced_term_exponent() {
        // p = 1, r = 1, β = t + 0.5 on [0, 1]: exponent ∫_t^{t+1/2} (1 - τ) dτ.
        let inst = IntervalOscInstance { p: pw("1"), terms: vec![(pw("1"), pw("t + 0.5"))], partition: [0.0, 1.0, 2.0, 3.0] };
        let sets = inst.sets(1e-2).unwrap();
        assert_eq!(sets.omega_plus, vec![1]);
        assert!((sets.t2_plus.unwrap() - 1.5).abs() < 1e-12);
        let coef = build_comparison_coefficient(&inst, 1.0, 1e-2).unwrap();
        for t in [0.0, 0.3, 0.7, 1.0] {
            let e = 0.375 - 0.5 * t;
            assert!((coef.eval(t).unwrap() - e.exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn constant_coefficient_second_interval() {
        let inst = IntervalOscInstance { p: pw("1"), terms: vec![(pw("2"), pw("t"))], partition: [0.0, 3.0, 3.0, 6.0] };
        let rep = check_interval_osc_thm22(&inst, &IntervalOscOptions::default()).unwrap();
        assert!(rep.all_verified(), "{:?}", rep.hypotheses);
        assert_eq!(rep.verdict, OscillationVerdict::CertifiedOscillatoryOn { a: 0.0, b: 6.0 });
    }

    #[test]
    fn vanishing_coefficients_fail_d() {
        let inst = IntervalOscInstance { p: pw("1"), terms: vec![(pw("0"), pw("t - 0.5"))], partition: [0.0, 3.0, 3.0, 6.0] };
        let rep = check_interval_osc_thm22(&inst, &IntervalOscOptions::default()).unwrap();
        assert_eq!(rep.hypothesis("d").unwrap().status, HypothesisStatus::Violated);
        assert_eq!(rep.verdict, OscillationVerdict::Inconclusive);
    }
}
