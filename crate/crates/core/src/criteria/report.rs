use serde::Serialize;

use crate::expr::SignPattern;
use crate::integrator::ConjugatePair;
use crate::OscillationVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    Verified,
    Violated,
    NotVerifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub id: String,
    pub status: HypothesisStatus,
    pub worst_point: Option<f64>,
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Hypothesis {
    pub fn new(id: &str, status: HypothesisStatus) -> Self {
        Hypothesis { id: id.to_string(), status, worst_point: None, margin: None, detail: None }
    }

    /// Verified when `margin >= -slack`, with the point where it is smallest.
    pub fn from_margin(id: &str, worst: Option<(f64, f64)>, slack: f64) -> Self {
        match worst {
            Some((t, m)) => Hypothesis {
                status: if m >= -slack { HypothesisStatus::Verified } else { HypothesisStatus::Violated },
                worst_point: Some(t),
                margin: Some(m),
                ..Hypothesis::new(id, HypothesisStatus::Verified)
            },
            None => Hypothesis::new(id, HypothesisStatus::Verified),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn verified(&self) -> bool {
        self.status == HypothesisStatus::Verified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaSets {
    pub omega_plus: Vec<usize>,
    pub omega1_minus: Vec<usize>,
    pub omega2_minus: Vec<usize>,
    pub big_t1: f64,
    pub big_t2: f64,
    pub t2_plus: Option<f64>,
    pub t3_minus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Closed-form solution of the comparison equation.
    Expression { expr: String, max_residual: f64, residual_l1: f64, min_abs: f64 },
    /// Integrated solution with its zero statistics.
    Trajectory { theta: String, zeta: f64, horizon: f64, zeros: usize, last_zero: Option<f64> },
    SignPattern { pattern: SignPattern },
    ConjugatePair { equation: String, interval: (f64, f64), epsilon: Option<f64>, pair: Option<ConjugatePair> },
    IntervalOscillation { interval: (f64, f64), on: (f64, f64), via: String },
    Sets { sets: OmegaSets },
    TrialFunction { interval: (f64, f64), family: String, parameter: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroCountRow {
    pub theta: String,
    pub zeta: f64,
    /// Sign-change zeros per checked interval.
    pub counts: Vec<usize>,
    pub all_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroCountTable {
    pub horizon: f64,
    pub seed: u64,
    pub intervals: Vec<(f64, f64)>,
    pub rows: Vec<ZeroCountRow>,
    pub all_hit: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub hypotheses: Vec<Hypothesis>,
    pub verdict: OscillationVerdict,
    pub caveats: Vec<String>,
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<ZeroCountTable>,
}

impl CriterionReport {
    pub fn new(criterion: &str) -> Self {
        CriterionReport {
            criterion: criterion.to_string(),
            hypotheses: Vec::new(),
            verdict: OscillationVerdict::Inconclusive,
            caveats: Vec::new(),
            witnesses: Vec::new(),
            cross_check: None,
        }
    }

    pub fn all_verified(&self) -> bool {
        self.hypotheses.iter().all(Hypothesis::verified)
    }

    pub fn hypothesis(&self, id: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.id == id)
    }

    pub fn caveat(&mut self, text: &str) {
        if !self.caveats.iter().any(|c| c == text) {
            self.caveats.push(text.to_string());
        }
    }

    /// `certified` if every hypothesis is verified, else `Inconclusive`.
    pub(crate) fn conclude(&mut self, certified: OscillationVerdict) {
        self.verdict = if self.all_verified() { certified } else { OscillationVerdict::Inconclusive };
    }
}
