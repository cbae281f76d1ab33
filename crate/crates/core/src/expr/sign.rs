//! Grid search for a forcing sign pattern: an interval where a function is
//! non-positive followed by one where it is non-negative.

use serde::Serialize;

use super::ScalarFn;

/// Slack allowed when confirming a sign claim at a grid point.
pub const SIGN_SLACK: f64 = 1e-12;
/// Default sampling step for grid-based hypothesis checks.
pub const DEFAULT_GRID_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    NonPositive,
    NonNegative,
}

impl Sign {
    fn holds(self, v: f64) -> bool {
        match self {
            Sign::NonPositive => v <= SIGN_SLACK,
            Sign::NonNegative => v >= -SIGN_SLACK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedInterval {
    pub s: f64,
    pub t: f64,
    pub sign: Sign,
    /// Largest `|f|` seen on the interval.
    pub margin: f64,
}

impl SignedInterval {
    pub fn len(&self) -> f64 {
        self.t - self.s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignPattern {
    pub window: (f64, f64),
    /// Either empty, or `[non-positive, non-negative]` with `s1 < t1 <= s2 < t2`.
    pub intervals: Vec<SignedInterval>,
}

impl SignPattern {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

fn holds_at(f: &dyn ScalarFn, x: f64, sign: Sign) -> bool {
    f.eval(x).map(|v| sign.holds(v)).unwrap_or(false)
}

/// Boundary between `good` (claim holds) and `bad` by bisection; returns the
/// last point on the `good` side.
fn refine(f: &dyn ScalarFn, mut good: f64, mut bad: f64, sign: Sign) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if holds_at(f, mid, sign) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

fn grid(window: (f64, f64), step: f64) -> Vec<f64> {
    let (a, b) = window;
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { b } else { a + i as f64 * step }).collect()
}

/// Maximal runs of grid points where `sign` holds, with refined endpoints,
/// confirmed on a 4x finer grid. Runs shorter than `min_len` are dropped.
pub fn sign_runs(f: &dyn ScalarFn, window: (f64, f64), min_len: f64, step: f64, sign: Sign) -> Vec<SignedInterval> {
    let g = grid(window, step);
    let ok: Vec<bool> = g.iter().map(|&x| holds_at(f, x, sign)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < g.len() {
        if !ok[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < g.len() && ok[i + 1] {
            i += 1;
        }
        let end = i;
        i += 1;
        let s = if start == 0 { g[0] } else { refine(f, g[start], g[start - 1], sign) };
        let t = if end + 1 == g.len() { g[end] } else { refine(f, g[end], g[end + 1], sign) };
        if t - s < min_len {
            continue;
        }
        if let Some(iv) = confirm(f, s, t, step / 4.0, sign) {
            out.push(iv);
        }
    }
    out
}

fn confirm(f: &dyn ScalarFn, s: f64, t: f64, step: f64, sign: Sign) -> Option<SignedInterval> {
    let mut margin: f64 = 0.0;
    for x in grid((s, t), step) {
        let v = f.eval(x).ok()?;
        if !sign.holds(v) {
            return None;
        }
        margin = margin.max(v.abs());
    }
    Some(SignedInterval { s, t, sign, margin })
}

/// First non-positive interval in the window followed by a non-negative one
/// starting no earlier than its end. Empty pattern when none exists.
pub fn find_sign_intervals(f: &dyn ScalarFn, window: (f64, f64), min_len: f64, step: f64) -> SignPattern {
    let mut pattern = SignPattern { window, intervals: Vec::new() };
    if !(window.1 > window.0) || !(min_len > 0.0) || !(step > 0.0) {
        return pattern;
    }
    let negatives = sign_runs(f, window, min_len, step, Sign::NonPositive);
    let positives = sign_runs(f, window, min_len, step, Sign::NonNegative);
    for neg in &negatives {
        let tol = 1e-9 * neg.t.abs().max(1.0);
        let found = positives.iter().find_map(|pos| {
            if pos.t - pos.s.max(neg.t) < min_len {
                return None;
            }
            if pos.s >= neg.t - tol {
                return Some(SignedInterval { s: pos.s.max(neg.t), ..*pos });
            }
            // A run that already covers t1, e.g. where f vanishes on a stretch.
            confirm(f, neg.t, pos.t, step / 4.0, Sign::NonNegative)
        });
        if let Some(pos) = found {
            pattern.intervals = vec![*neg, pos];
            return pattern;
        }
    }
    pattern
}
