//! Oscillation of the forced equation from a forcing sign pattern and
//! interval oscillation of a homogeneous comparison equation.

use crate::expr::{find_sign_intervals, FnCoefficient, PiecewiseFn, ScalarFn, SignPattern, DEFAULT_GRID_STEP};
use crate::integrator::{conjugate_scan, DelayTerm, EquationSpec, SolveOptions, DEFAULT_SCAN_POINTS};
use crate::OscillationVerdict;

use super::crosscheck::{random_histories, zero_count_table, CrossCheck};
use super::interval::{check_interval_osc_thm22, IntervalOscInstance, IntervalOscOptions};
use super::report::{CriterionReport, Hypothesis, HypothesisStatus, Witness};
use super::{arguments_diverge, check_window, dominance, sign_exemption, CriteriaError};

/// How oscillation of the comparison equation on a sign interval is
/// established.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalStrategy {
    /// Interval criterion with the given partitions `[t1, t2, t3, t4]`;
    /// a sign interval is covered when some partition certifies
    /// oscillation on a subinterval of it. Needs `q ≡ 0`.
    Thm22 { partitions: Vec<[f64; 4]>, interval: IntervalOscOptions },
    /// Conjugate points of the comparison ODE; needs `α_j(t) = t`.
    ConjugateScan,
    /// Taken on trust; never certifies.
    Assume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscOptions {
    /// Disjoint sign patterns required inside the window.
    pub repetitions: usize,
    pub grid_step: f64,
    /// Shortest accepted sign interval; the smallest positive lag, or ten
    /// grid steps, when unset.
    pub min_len: Option<f64>,
    pub strategy: IntervalStrategy,
    pub scan_points: usize,
    pub tol: f64,
    pub cross_check: Option<CrossCheck>,
    pub solve: SolveOptions,
}

impl Default for OscOptions {
    fn default() -> Self {
        OscOptions {
            repetitions: 3,
            grid_step: DEFAULT_GRID_STEP,
            min_len: None,
            strategy: IntervalStrategy::ConjugateScan,
            scan_points: DEFAULT_SCAN_POINTS,
            tol: 1e-9,
            cross_check: None,
            solve: SolveOptions::default(),
        }
    }
}

fn min_positive_lag(eq: &EquationSpec, window: (f64, f64), step: f64) -> Option<f64> {
    let mut m: Option<f64> = None;
    for t in crate::integrator::sample_grid(window.0, window.1, step) {
        for d in &eq.terms {
            if let Ok(a) = d.alpha.eval(t) {
                let lag = t - a;
                if lag > 1e-12 {
                    m = Some(m.map_or(lag, |x: f64| x.min(lag)));
                }
            }
        }
    }
    m
}

/// Up to `n` successive sign patterns, each starting where the previous
/// non-negative interval ends.
fn repeated_patterns(f: &dyn ScalarFn, window: (f64, f64), n: usize, min_len: f64, step: f64) -> Vec<SignPattern> {
    let mut out = Vec::new();
    let mut start = window.0;
    while out.len() < n && start < window.1 {
        let pat = find_sign_intervals(f, (start, window.1), min_len, step);
        if pat.is_empty() {
            break;
        }
        start = pat.intervals[1].t;
        out.push(pat);
    }
    out
}

fn contains(outer: (f64, f64), inner: (f64, f64)) -> bool {
    let slack = 1e-9 * outer.0.abs().max(outer.1.abs()).max(1.0);
    inner.0 >= outer.0 - slack && inner.1 <= outer.1 + slack
}

/// Result of establishing oscillation on one sign interval.
enum Established {
    Yes(Witness),
    No(String),
    Unknown(String),
}

/// Oscillation of `eq` from a homogeneous comparison equation with
/// coefficients `r1` (same `p`, `q`, `α_j`).
pub fn check_oscillation_thm32(
    eq: &EquationSpec,
    r1: &[PiecewiseFn],
    window: (f64, f64),
    opts: &OscOptions,
) -> Result<CriterionReport, CriteriaError> {
    run_thm32("thm32", eq, r1, window, opts)
}

fn run_thm32(
    id: &str,
    eq: &EquationSpec,
    r1: &[PiecewiseFn],
    window: (f64, f64),
    opts: &OscOptions,
) -> Result<CriterionReport, CriteriaError> {
    if r1.len() != eq.terms.len() {
        return Err(CriteriaError::ShapeMismatch { expected: eq.terms.len(), found: r1.len() });
    }
    check_window(window)?;
    let step = opts.grid_step;
    let r: Vec<&PiecewiseFn> = eq.terms.iter().map(|d| &d.r).collect();
    let r1_ref: Vec<&PiecewiseFn> = r1.iter().collect();
    let alphas: Vec<&PiecewiseFn> = eq.terms.iter().map(|d| &d.alpha).collect();

    let mut rep = CriterionReport::new(id);
    rep.hypotheses.push(dominance("I", &r, &r1_ref, window, step)?);
    rep.hypotheses.push(sign_exemption("II", &r1_ref, &r, &alphas, window, step)?);
    rep.hypotheses.push(arguments_diverge("III", &alphas, window, step)?);
    rep.caveat("coefficient conditions sampled on a grid over the window only");
    rep.caveat("argument divergence checked as a bounded lag on a finite window");

    // IV) repeated sign patterns of f.
    let min_len = opts.min_len.unwrap_or_else(|| min_positive_lag(eq, window, step).unwrap_or(10.0 * step));
    let patterns = repeated_patterns(&eq.f, window, opts.repetitions.max(1), min_len, step);
    let iv = if patterns.len() >= opts.repetitions.max(1) {
        Hypothesis::new("IV", HypothesisStatus::Verified)
            .with_detail(format!("verified (finite horizon): {} disjoint sign patterns in the window", patterns.len()))
    } else {
        Hypothesis::new("IV", HypothesisStatus::Violated).with_detail(format!(
            "found {} of {} required sign patterns in [{}, {}]",
            patterns.len(),
            opts.repetitions.max(1),
            window.0,
            window.1
        ))
    };
    let iv_ok = iv.verified();
    let mut iv = iv;
    iv.worst_point = patterns.last().map(|p| p.intervals[1].t);
    rep.hypotheses.push(iv);
    rep.caveat("the sign pattern is required beyond every T; only finitely many repetitions are checked");
    for p in &patterns {
        rep.witnesses.push(Witness::SignPattern { pattern: p.clone() });
    }

    // V) the comparison equation is oscillatory on every sign interval.
    let cmp = EquationSpec {
        f: PiecewiseFn::constant(0.0),
        terms: eq.terms.iter().zip(r1).map(|(d, r)| DelayTerm { r: r.clone(), alpha: d.alpha.clone() }).collect(),
        ..eq.clone()
    };
    let intervals: Vec<(f64, f64)> = patterns.iter().flat_map(|p| p.intervals.iter().map(|iv| (iv.s, iv.t))).collect();
    let v = if !iv_ok {
        Hypothesis::new("V", HypothesisStatus::NotVerifiable).with_detail("no sign intervals to check")
    } else {
        let mut cache: Vec<Option<Result<CriterionReport, String>>> = Vec::new();
        // (point, violated, message) of the worst unestablished interval.
        let mut worst: Option<(f64, bool, String)> = None;
        for &iv in &intervals {
            let (violated, msg) = match establish(&cmp, iv, opts, &mut cache)? {
                Established::Yes(w) => {
                    rep.witnesses.push(w);
                    continue;
                }
                Established::No(msg) => (true, msg),
                Established::Unknown(msg) => (false, msg),
            };
            if worst.as_ref().map_or(true, |w| violated && !w.1) {
                worst = Some((iv.0, violated, msg));
            }
        }
        match worst {
            None => Hypothesis::new("V", HypothesisStatus::Verified)
                .with_detail(format!("comparison equation oscillatory on all {} sign intervals", intervals.len())),
            Some((t, violated, msg)) => {
                let status = if violated { HypothesisStatus::Violated } else { HypothesisStatus::NotVerifiable };
                let mut h = Hypothesis::new("V", status).with_detail(msg);
                h.worst_point = Some(t);
                h
            }
        }
    };
    rep.hypotheses.push(v);

    if let Some(cc) = &opts.cross_check {
        let mut cc = cc.clone();
        if cc.intervals.is_empty() {
            cc.intervals = intervals.clone();
        }
        if !(cc.horizon > window.0) {
            cc.horizon = window.1;
        }
        let t1 = window.0.max(eq.t0);
        let hs = random_histories(cc.histories, cc.seed, t1);
        rep.cross_check = Some(zero_count_table(eq, &hs, &cc, &opts.solve)?);
    }

    rep.conclude(OscillationVerdict::CertifiedOscillatory);
    let only_unverifiable = rep.hypotheses.iter().all(|h| h.status != HypothesisStatus::Violated);
    if rep.verdict.is_inconclusive() && only_unverifiable {
        if let Some(table) = &rep.cross_check {
            if table.all_hit {
                rep.verdict = OscillationVerdict::NumericOscillatory { horizon: table.horizon };
                rep.caveat("verdict rests on the numeric zero counts, not on the criterion");
            }
        }
    }
    Ok(rep)
}

fn establish(
    cmp: &EquationSpec,
    iv: (f64, f64),
    opts: &OscOptions,
    cache: &mut Vec<Option<Result<CriterionReport, String>>>,
) -> Result<Established, CriteriaError> {
    match &opts.strategy {
        IntervalStrategy::Assume => Ok(Established::Unknown("oscillation on the sign intervals assumed, not checked".into())),
        IntervalStrategy::ConjugateScan => {
            let mut undeviated = true;
            for d in &cmp.terms {
                undeviated &= d.alpha.is_identity() || d.r.as_constant() == Some(0.0);
            }
            if !undeviated {
                return Ok(Established::Unknown("conjugate scan needs alpha_j(t) = t for every term".into()));
            }
            let sum = FnCoefficient::new(
                |t| cmp.terms.iter().try_fold(0.0, |acc, d| Ok(acc + d.r.eval(t)?)),
                cmp.terms.iter().flat_map(|d| d.r.breakpoints()).collect(),
            );
            let osc = conjugate_scan(&cmp.p, &cmp.q, &sum, iv, opts.scan_points, opts.tol)?;
            Ok(match osc.witness {
                Some(pair) => Established::Yes(Witness::ConjugatePair {
                    equation: "comparison".into(),
                    interval: iv,
                    epsilon: None,
                    pair: Some(pair),
                }),
                None => Established::No(format!("no conjugate pair in [{}, {}]", iv.0, iv.1)),
            })
        }
        IntervalStrategy::Thm22 { partitions, interval } => {
            if cmp.q.as_constant() != Some(0.0) {
                return Ok(Established::Unknown(
                    "the interval criterion covers q = 0 only; use the conjugate-scan or assume strategy".into(),
                ));
            }
            if cache.len() < partitions.len() {
                cache.resize(partitions.len(), None);
            }
            let inst_terms: Vec<(PiecewiseFn, PiecewiseFn)> = cmp.terms.iter().map(|d| (d.r.clone(), d.alpha.clone())).collect();
            let mut failure = None;
            for (i, part) in partitions.iter().enumerate() {
                if !contains(iv, (part[0], part[3])) {
                    continue;
                }
                let entry = cache[i].get_or_insert_with(|| {
                    let inst = IntervalOscInstance { p: cmp.p.clone(), terms: inst_terms.clone(), partition: *part };
                    check_interval_osc_thm22(&inst, interval).map_err(|e| e.to_string())
                });
                match entry {
                    Ok(sub) => match sub.verdict {
                        OscillationVerdict::CertifiedOscillatoryOn { a, b } if contains(iv, (a, b)) => {
                            return Ok(Established::Yes(Witness::IntervalOscillation {
                                interval: iv,
                                on: (a, b),
                                via: format!("interval criterion with partition {part:?}"),
                            }));
                        }
                        OscillationVerdict::CertifiedOscillatoryOn { a, b } => {
                            failure = Some(format!("partition {part:?} certifies [{a}, {b}], which leaves [{}, {}]", iv.0, iv.1));
                        }
                        _ => {
                            let failed: Vec<&str> =
                                sub.hypotheses.iter().filter(|h| !h.verified()).map(|h| h.id.as_str()).collect();
                            failure = Some(format!("partition {part:?}: conditions {} not verified", failed.join(", ")));
                        }
                    },
                    Err(e) => failure = Some(format!("partition {part:?}: {e}")),
                }
            }
            Ok(match failure {
                Some(msg) => Established::No(msg),
                None => Established::Unknown(format!("no configured partition lies inside [{}, {}]", iv.0, iv.1)),
            })
        }
    }
}

/// Oscillation of the equation with coefficients `r_j⁺`, compared with its
/// own homogeneous part.
pub fn check_oscillation_cor32(eq: &EquationSpec, window: (f64, f64), opts: &OscOptions) -> Result<CriterionReport, CriteriaError> {
    let plus = EquationSpec {
        terms: eq.terms.iter().map(|d| DelayTerm { r: d.r.positive_part(), alpha: d.alpha.clone() }).collect(),
        ..eq.clone()
    };
    let r1: Vec<PiecewiseFn> = plus.terms.iter().map(|d| d.r.clone()).collect();
    run_thm32("cor32", &plus, &r1, window, opts)
}
