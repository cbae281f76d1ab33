//! Variational oscillation test for the forced ODE `(dφ')' + rφ = g`:
//! a sign pattern of `g` and, on each sign interval, a trial function `u`
//! vanishing at the ends with `∫(r u² - d u'²) >= 0`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::expr::{integrate, EvalError, PiecewiseFn, SignPattern, SignedInterval, DEFAULT_GRID_STEP};
use crate::OscillationVerdict;

use super::report::{CriterionReport, Hypothesis, HypothesisStatus, Witness};
use super::{check_window, CriteriaError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFamily {
    /// Exponents `m` of `sin^m(π (t - s)/(t_i - s))`.
    pub sine_powers: Vec<u32>,
    /// Number of interior peak positions of the piecewise-linear hats.
    pub hat_peaks: usize,
}

impl Default for TrialFamily {
    fn default() -> Self {
        TrialFamily { sine_powers: vec![1, 2, 3], hat_peaks: 9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WongInstance {
    pub d: PiecewiseFn,
    pub r: PiecewiseFn,
    pub g: PiecewiseFn,
    /// Sign intervals `[s1, t1]` (g <= 0) and `[s2, t2]` (g >= 0) to use;
    /// searched in the window when unset.
    pub intervals: Option<[(f64, f64); 2]>,
    pub family: TrialFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WongOptions {
    pub window: (f64, f64),
    pub repetitions: usize,
    pub grid_step: f64,
    pub tol: f64,
}

impl Default for WongOptions {
    fn default() -> Self {
        WongOptions { window: (0.0, 100.0), repetitions: 3, grid_step: DEFAULT_GRID_STEP, tol: 1e-10 }
    }
}

/// `∫_a^b (r u² - d u'²)` for `u` given with its derivative.
pub fn q_functional(
    d: &PiecewiseFn,
    r: &PiecewiseFn,
    u: &dyn Fn(f64) -> (f64, f64),
    interval: (f64, f64),
    breaks: &[f64],
) -> Result<f64, CriteriaError> {
    let (a, b) = interval;
    let mut all: Vec<f64> = breaks.iter().copied().chain(d.breakpoints()).chain(r.breakpoints()).filter(|&x| x > a && x < b).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let integrand = |t: f64| -> Result<f64, EvalError> {
        let (v, dv) = u(t);
        Ok(r.eval(t)? * v * v - d.eval(t)? * dv * dv)
    };
    Ok(integrate(integrand, a, b, &all, 1e-14)?)
}

struct Best {
    family: String,
    parameter: f64,
    q: f64,
}

fn maximize(inst: &WongInstance, (s, t): (f64, f64)) -> Result<Best, CriteriaError> {
    let len = t - s;
    let mut best = Best { family: String::new(), parameter: f64::NAN, q: f64::NEG_INFINITY };
    for &m in &inst.family.sine_powers {
        let k = PI / len;
        let u = move |x: f64| {
            let arg = k * (x - s);
            let (sn, cs) = arg.sin_cos();
            let v = sn.powi(m as i32);
            let dv = if m == 0 { 0.0 } else { m as f64 * sn.powi(m as i32 - 1) * cs * k };
            (v, dv)
        };
        let q = q_functional(&inst.d, &inst.r, &u, (s, t), &[])?;
        if q > best.q {
            best = Best { family: "sin^m".into(), parameter: m as f64, q };
        }
    }
    for i in 1..=inst.family.hat_peaks {
        let c = s + len * i as f64 / (inst.family.hat_peaks + 1) as f64;
        let u = move |x: f64| if x <= c { ((x - s) / (c - s), 1.0 / (c - s)) } else { ((t - x) / (t - c), -1.0 / (t - c)) };
        let q = q_functional(&inst.d, &inst.r, &u, (s, t), &[c])?;
        if q > best.q {
            best = Best { family: "hat".into(), parameter: c, q };
        }
    }
    Ok(best)
}

fn confirm_sign(g: &PiecewiseFn, iv: (f64, f64), nonneg: bool, step: f64) -> Result<Option<f64>, EvalError> {
    let mut bad = None;
    for t in crate::integrator::sample_grid(iv.0, iv.1, step) {
        let v = g.eval(t)?;
        let ok = if nonneg { v >= -crate::expr::SIGN_SLACK } else { v <= crate::expr::SIGN_SLACK };
        if !ok {
            bad = Some(t);
            break;
        }
    }
    Ok(bad)
}

/// Run the test. With explicit intervals only that pair is used; otherwise
/// `repetitions` successive sign patterns are searched in the window.
pub fn wong_test(inst: &WongInstance, opts: &WongOptions) -> Result<CriterionReport, CriteriaError> {
    let step = opts.grid_step;
    let mut rep = CriterionReport::new("wong");
    let pairs: Vec<[(f64, f64); 2]> = match inst.intervals {
        Some(pair) => {
            for (i, &iv) in pair.iter().enumerate() {
                if !(iv.1 - iv.0 >= step) {
                    return Err(CriteriaError::DegenerateInterval { a: iv.0, b: iv.1 });
                }
                if let Some(t) = confirm_sign(&inst.g, iv, i == 1, step)? {
                    let mut h = Hypothesis::new("sign_pattern", HypothesisStatus::Violated)
                        .with_detail(format!("forcing has the wrong sign in interval {}", i + 1));
                    h.worst_point = Some(t);
                    rep.hypotheses.push(h);
                    return Ok(rep);
                }
            }
            let ivs = pair
                .iter()
                .enumerate()
                .map(|(i, &(s, t))| SignedInterval {
                    s,
                    t,
                    sign: if i == 0 { crate::expr::Sign::NonPositive } else { crate::expr::Sign::NonNegative },
                    margin: 0.0,
                })
                .collect();
            rep.witnesses.push(Witness::SignPattern { pattern: SignPattern { window: (pair[0].0, pair[1].1), intervals: ivs } });
            rep.hypotheses.push(Hypothesis::new("sign_pattern", HypothesisStatus::Verified).with_detail("given intervals confirmed"));
            vec![pair]
        }
        None => {
            check_window(opts.window)?;
            let mut out = Vec::new();
            let mut start = opts.window.0;
            while out.len() < opts.repetitions.max(1) && start < opts.window.1 {
                let pat = crate::expr::find_sign_intervals(&inst.g, (start, opts.window.1), 10.0 * step, step);
                if pat.is_empty() {
                    break;
                }
                start = pat.intervals[1].t;
                out.push([(pat.intervals[0].s, pat.intervals[0].t), (pat.intervals[1].s, pat.intervals[1].t)]);
                rep.witnesses.push(Witness::SignPattern { pattern: pat });
            }
            if out.is_empty() {
                return Err(CriteriaError::NoSignPattern { a: opts.window.0, b: opts.window.1 });
            }
            let status = if out.len() >= opts.repetitions.max(1) { HypothesisStatus::Verified } else { HypothesisStatus::Violated };
            rep.hypotheses.push(
                Hypothesis::new("sign_pattern", status)
                    .with_detail(format!("{} of {} sign patterns found (finite horizon)", out.len(), opts.repetitions.max(1))),
            );
            out
        }
    };
    rep.caveat("the sign pattern is required beyond every T; only finitely many repetitions are checked");

    for (n, pair) in pairs.iter().enumerate() {
        for (i, &iv) in pair.iter().enumerate() {
            let best = maximize(inst, iv)?;
            let id = format!("Q{}", 2 * n + i + 1);
            let mut h = Hypothesis::from_margin(&id, Some((iv.0, best.q)), opts.tol);
            h.detail = Some(format!("best trial function {} with parameter {}", best.family, best.parameter));
            rep.hypotheses.push(h);
            rep.witnesses.push(Witness::TrialFunction { interval: iv, family: best.family, parameter: best.parameter, q: best.q });
        }
    }
    rep.conclude(OscillationVerdict::CertifiedOscillatory);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pw(s: &str) -> PiecewiseFn {
        parse(s).unwrap()
    }

    fn sine(x: f64) -> (f64, f64) {
        (x.sin(), x.cos())
    }

    #[test]
    fn closed_forms() {
        let q = q_functional(&pw("1"), &pw("1"), &sine, (0.0, PI), &[]).unwrap();
        assert!(q.abs() < 1e-10);
        let q = q_functional(&pw("1"), &pw("2"), &sine, (0.0, PI), &[]).unwrap();
        assert!((q - PI / 2.0).abs() < 1e-10);
        let q = q_functional(&pw("1"), &pw("0"), &sine, (0.0, PI), &[]).unwrap();
        assert!(q < 0.0);
    }

    #[test]
    fn harmonic_with_sine_forcing() {
        let inst = WongInstance { d: pw("1"), r: pw("1"), g: pw("sin(t)"), intervals: None, family: TrialFamily::default() };
        let rep = wong_test(&inst, &WongOptions { window: (0.0, 40.0), ..WongOptions::default() }).unwrap();
        assert_eq!(rep.verdict, OscillationVerdict::CertifiedOscillatory, "{:?}", rep.hypotheses);
    }

    #[test]
    fn zero_potential_fails() {
        let inst = WongInstance { d: pw("1"), r: pw("0"), g: pw("sin(t)"), intervals: None, family: TrialFamily::default() };
        let rep = wong_test(&inst, &WongOptions { window: (0.0, 40.0), ..WongOptions::default() }).unwrap();
        assert_eq!(rep.verdict, OscillationVerdict::Inconclusive);
        assert!(rep.hypotheses.iter().any(|h| h.status == HypothesisStatus::Violated));
    }

    #[test]
    fn no_pattern_is_an_error() {
        let inst = WongInstance { d: pw("1"), r: pw("1"), g: pw("1"), intervals: None, family: TrialFamily::default() };
        assert!(matches!(wong_test(&inst, &WongOptions::default()), Err(CriteriaError::NoSignPattern { .. })));
    }
}
