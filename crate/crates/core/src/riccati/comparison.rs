//! Ordering of solutions of the forced and homogeneous functional Riccati
//! equations.

use serde::Serialize;

use super::{solve_riccati, BlowUp, RiccatiError, RiccatiOptions, RiccatiProblem, RiccatiTrajectory};
use crate::expr::{PiecewiseFn, SIGN_SLACK};
use crate::integrator::{sample_grid, EquationSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub id: String,
    pub holds: bool,
    pub worst_point: Option<f64>,
    pub margin: f64,
}

impl ConditionCheck {
    pub(crate) fn at(id: &str, holds: bool, t: f64, margin: f64) -> Self {
        ConditionCheck { id: id.to_string(), holds, worst_point: Some(t), margin }
    }

    pub(crate) fn scalar(id: &str, holds: bool, margin: f64) -> Self {
        ConditionCheck { id: id.to_string(), holds, worst_point: None, margin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub interval: (f64, f64),
    /// End of the range on which both solutions were computed.
    pub reached: f64,
    pub conditions: Vec<ConditionCheck>,
    pub ordering_margin: f64,
    pub ordering_worst_point: f64,
    pub blowups: Vec<BlowUp>,
    pub conclusion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    /// Larger comparison coefficients: a solution of the homogeneous
    /// equation bounds the forced one from below.
    Lemma22,
    /// Smaller comparison coefficients: a solution of the forced equation
    /// bounds the homogeneous one from below.
    Lemma23,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalComparison {
    pub eq: EquationSpec,
    pub r1: Vec<PiecewiseFn>,
    pub lambda: f64,
    pub mode: ComparisonMode,
    pub interval: (f64, f64),
    /// Past of the solution expected to stay on top.
    pub upper_past: PiecewiseFn,
    /// Past of the solution assumed to exist.
    pub lower_past: PiecewiseFn,
}

/// Worst value of `g` on the grid; `g` returns `None` where a point is exempt.
fn worst_on(grid: &[f64], mut g: impl FnMut(f64) -> Result<Option<f64>, RiccatiError>) -> Result<(f64, f64), RiccatiError> {
    let mut worst = (grid[0], f64::INFINITY);
    for &t in grid {
        if let Some(v) = g(t)? {
            if v < worst.1 {
                worst = (t, v);
            }
        }
    }
    Ok(worst)
}

fn check(id: &str, worst: (f64, f64)) -> ConditionCheck {
    ConditionCheck::at(id, worst.1 >= -SIGN_SLACK, worst.0, worst.1)
}

fn is_identity_at(alpha: &PiecewiseFn, t: f64) -> Result<bool, RiccatiError> {
    Ok((alpha.eval(t)? - t).abs() <= 1e-12 * t.abs().max(1.0))
}

/// Check the comparison conditions on a grid, integrate both Riccati
/// equations over the interval and report the ordering margin.
pub fn verify_functional_comparison(cmp: &FunctionalComparison, tol: f64) -> Result<ComparisonReport, RiccatiError> {
    let eq = &cmp.eq;
    let (t1, t2) = cmp.interval;
    if cmp.r1.len() != eq.terms.len() {
        return Err(RiccatiError::TermCount { expected: eq.terms.len(), found: cmp.r1.len() });
    }
    if cmp.lambda == 0.0 {
        return Err(RiccatiError::ZeroLambda);
    }
    let grid = sample_grid(t1, t2, 1e-2);
    let lemma22 = cmp.mode == ComparisonMode::Lemma22;
    let mut conditions = Vec::new();

    // 1) / 1'): r1 >= r or r1 <= r.
    let w = worst_on(&grid, |t| {
        let mut m = f64::INFINITY;
        for (r1, d) in cmp.r1.iter().zip(&eq.terms) {
            let diff = r1.eval(t)? - d.r.eval(t)?;
            m = m.min(if lemma22 { diff } else { -diff });
        }
        Ok(Some(m))
    })?;
    conditions.push(check(if lemma22 { "1" } else { "1'" }, w));

    // 2) / 2'): wherever the dominated coefficient is negative, the other is
    // nonnegative or the argument is not deviated.
    let w = worst_on(&grid, |t| {
        let mut m = f64::INFINITY;
        for (r1, d) in cmp.r1.iter().zip(&eq.terms) {
            let (neg, other) = if lemma22 { (d.r.eval(t)?, r1.eval(t)?) } else { (r1.eval(t)?, d.r.eval(t)?) };
            if neg < 0.0 && !is_identity_at(&d.alpha, t)? {
                m = m.min(other);
            }
        }
        Ok(Some(m))
    })?;
    conditions.push(check(if lemma22 { "2" } else { "2'" }, w));

    // 3) / 3'): sign of f/λ.
    let w = worst_on(&grid, |t| {
        let v = eq.f.eval(t)? / cmp.lambda;
        Ok(Some(if lemma22 { v } else { -v }))
    })?;
    conditions.push(check(if lemma22 { "3" } else { "3'" }, w));

    // Ordered initial data: upper >= lower on [T, t1], strictly at t1.
    let lowest = eq.min_argument(t1, t2, 1e-2).min(t1);
    let past_grid = sample_grid(lowest, t1, 1e-2);
    let w = worst_on(&past_grid, |t| Ok(Some(cmp.upper_past.eval(t)? - cmp.lower_past.eval(t)?)))?;
    let gap = cmp.upper_past.eval(t1)? - cmp.lower_past.eval(t1)?;
    conditions.push(ConditionCheck::at("initial_order", w.1 >= -SIGN_SLACK && gap > 0.0, w.0, w.1.min(gap)));

    let forced = |past: &PiecewiseFn| RiccatiProblem {
        eq: eq.clone(),
        lambda: cmp.lambda,
        t1,
        gamma: past.clone(),
        homogeneous: false,
        r1: None,
    };
    let homogeneous = |past: &PiecewiseFn| RiccatiProblem {
        eq: eq.clone(),
        lambda: cmp.lambda,
        t1,
        gamma: past.clone(),
        homogeneous: true,
        r1: Some(cmp.r1.clone()),
    };
    let (upper_prob, lower_prob) = if lemma22 {
        (forced(&cmp.upper_past), homogeneous(&cmp.lower_past))
    } else {
        (homogeneous(&cmp.upper_past), forced(&cmp.lower_past))
    };
    let opts = RiccatiOptions::with_tol(tol.min(1e-9));
    let upper = solve_riccati(&upper_prob, t2, &opts)?;
    let lower = solve_riccati(&lower_prob, t2, &opts)?;
    conditions.push(ConditionCheck::at("assumed_solution_exists", lower.is_clean(), lower.horizon, lower.horizon - t2));

    let reached = upper.horizon.min(lower.horizon);
    let (worst_t, margin) = ordering(&upper, &lower, &grid, reached);
    let blowups: Vec<BlowUp> = [&upper, &lower].iter().filter_map(|r| r.blowup.clone()).collect();
    let conclusion = conditions.iter().all(|c| c.holds) && upper.is_clean() && margin > -tol;
    Ok(ComparisonReport {
        interval: (t1, t2),
        reached,
        conditions,
        ordering_margin: margin,
        ordering_worst_point: worst_t,
        blowups,
        conclusion,
    })
}

fn ordering(upper: &RiccatiTrajectory, lower: &RiccatiTrajectory, grid: &[f64], reached: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = grid.iter().copied().filter(|&t| t <= reached).collect();
    pts.extend(upper.mesh().into_iter().chain(lower.mesh()).filter(|&t| t <= reached));
    let mut worst = (upper.t1, f64::INFINITY);
    for t in pts {
        if let (Some(u), Some(l)) = (upper.y(t), lower.y(t)) {
            if u - l < worst.1 {
                worst = (t, u - l);
            }
        }
    }
    worst
}
