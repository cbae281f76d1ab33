//! Scenario files: one TOML document per scenario.
//!
//! Numbers that may be irrational (`3*pi + 1`) can be written as strings;
//! they go through the same constant parser as coefficient expressions.

use serde::{Deserialize, Serialize};

use fdosc_core::expr::{parse, parse_constant, PiecewiseFn};
use fdosc_core::integrator::{DelayTerm, EquationSpec, HistorySpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Expr(String),
}

impl Num {
    pub fn resolve(&self, field: &str) -> Result<f64, CliError> {
        match self {
            Num::Value(v) => Ok(*v),
            Num::Expr(s) => parse_constant(s).map_err(|e| CliError::Config(format!("{field}: {e}"))),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equation: Option<EquationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<HistoryBlock>,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wong: Option<WongBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationBlock {
    #[serde(default = "one")]
    pub p: String,
    #[serde(default = "zero")]
    pub q: String,
    #[serde(default = "zero")]
    pub f: String,
    #[serde(default = "zero_num")]
    pub t0: Num,
    pub terms: Vec<TermBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermBlock {
    pub r: String,
    #[serde(default = "ident")]
    pub alpha: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<Num>,
    pub theta: String,
    #[serde(default = "zero_num")]
    pub zeta: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFamily {
    /// Partition for `l = 0`; partition `l` adds `l * period`.
    pub base: [Num; 4],
    pub period: Num,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periodic {
    pub start: Num,
    pub period: Num,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckBlock {
    #[serde(default = "twenty")]
    pub histories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Num>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<[Num; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<Periodic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroFreeBlock {
    pub horizon: Num,
    /// Tried first, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub histories: Vec<HistoryBlock>,
    /// Seeded random histories tried after the listed ones.
    #[serde(default = "twenty")]
    pub random: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[Num; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Num>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Comparison coefficients `r_{1,j}`; the equation's own `r_j` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<String>>,
    /// Closed-form solution of the comparison equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness_histories: Vec<HistoryBlock>,
    #[serde(default = "three")]
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_len: Option<Num>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partitions: Vec<[Num; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_family: Option<PartitionFamily>,
    #[serde(default = "one_f")]
    pub eps0: f64,
    #[serde(default = "eight")]
    pub eps_halvings: u32,
    #[serde(default = "sixty_four")]
    pub scan_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheckBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_free: Option<ZeroFreeBlock>,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        toml::from_str("").expect("empty analysis block")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WongBlock {
    pub d: String,
    pub r: String,
    pub g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<[[Num; 2]; 2]>,
    #[serde(default = "sines")]
    pub sine_powers: Vec<u32>,
    #[serde(default = "nine")]
    pub hat_peaks: usize,
    #[serde(default = "wong_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn one() -> String {
    "1".into()
}
fn zero() -> String {
    "0".into()
}
fn ident() -> String {
    "t".into()
}
fn zero_num() -> Num {
    Num::Value(0.0)
}
fn default_tol() -> f64 {
    1e-9
}
fn default_grid_step() -> f64 {
    1e-2
}
fn default_strategy() -> String {
    "conjugate-scan".into()
}
fn one_f() -> f64 {
    1.0
}
fn three() -> usize {
    3
}
fn eight() -> u32 {
    8
}
fn nine() -> usize {
    9
}
fn twenty() -> usize {
    20
}
fn sixty_four() -> usize {
    64
}
fn sines() -> Vec<u32> {
    vec![1, 2, 3]
}
fn wong_tol() -> f64 {
    1e-10
}

pub fn parse_fn(field: &str, src: &str) -> Result<PiecewiseFn, CliError> {
    parse(src).map_err(|e| CliError::Config(format!("{field}: {e} in \"{src}\"")))
}

impl ScenarioConfig {
    pub fn from_toml(src: &str) -> Result<ScenarioConfig, CliError> {
        toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn equation(&self) -> Result<EquationSpec, CliError> {
        let e = self.equation.as_ref().ok_or_else(|| CliError::Config("missing [equation] block".into()))?;
        let terms = e
            .terms
            .iter()
            .enumerate()
            .map(|(j, t)| {
                Ok(DelayTerm {
                    r: parse_fn(&format!("equation.terms[{j}].r"), &t.r)?,
                    alpha: parse_fn(&format!("equation.terms[{j}].alpha"), &t.alpha)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(EquationSpec {
            p: parse_fn("equation.p", &e.p)?,
            q: parse_fn("equation.q", &e.q)?,
            f: parse_fn("equation.f", &e.f)?,
            terms,
            t0: e.t0.resolve("equation.t0")?,
        })
    }

    pub fn t0(&self) -> Result<f64, CliError> {
        match &self.equation {
            Some(e) => e.t0.resolve("equation.t0"),
            None => Ok(0.0),
        }
    }

    pub fn history(&self) -> Result<HistorySpec, CliError> {
        let h = self.history.as_ref().ok_or_else(|| CliError::Config("missing [history] block".into()))?;
        history_from(h, "history", self.t0()?)
    }

    /// `[a, b]` from `analysis.window`, else `[t0, horizon]`.
    pub fn window(&self) -> Result<(f64, f64), CliError> {
        let a = &self.analysis;
        let (lo, hi) = match (&a.window, &a.horizon) {
            (Some([lo, hi]), _) => (lo.resolve("analysis.window[0]")?, hi.resolve("analysis.window[1]")?),
            (None, Some(h)) => (self.t0()?, h.resolve("analysis.horizon")?),
            (None, None) => return Err(CliError::Config("set analysis.window or analysis.horizon".into())),
        };
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(CliError::Config(format!("analysis.window must be ordered, got [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        match &self.analysis.horizon {
            Some(h) => h.resolve("analysis.horizon"),
            None => Ok(self.window()?.1),
        }
    }

    pub fn comparison(&self, eq: &EquationSpec) -> Result<Vec<PiecewiseFn>, CliError> {
        match &self.analysis.comparison {
            None => Ok(eq.terms.iter().map(|d| d.r.clone()).collect()),
            Some(list) => list.iter().enumerate().map(|(j, s)| parse_fn(&format!("analysis.comparison[{j}]"), s)).collect(),
        }
    }

    pub fn partitions(&self) -> Result<Vec<[f64; 4]>, CliError> {
        let a = &self.analysis;
        let mut out = Vec::new();
        for (i, p) in a.partitions.iter().enumerate() {
            out.push(resolve4(p, &format!("analysis.partitions[{i}]"))?);
        }
        if let Some(fam) = &a.partition_family {
            let base = resolve4(&fam.base, "analysis.partition_family.base")?;
            let period = fam.period.resolve("analysis.partition_family.period")?;
            for l in 0..fam.count {
                out.push(base.map(|x| x + l as f64 * period));
            }
        }
        Ok(out)
    }

    pub fn eps_schedule(&self) -> Vec<f64> {
        (0..=self.analysis.eps_halvings).map(|i| self.analysis.eps0 * 0.5f64.powi(i as i32)).collect()
    }

    /// Check every expression and numeric setting without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.equation.is_some() {
            let eq = self.equation()?;
            let r1 = self.comparison(&eq)?;
            if r1.len() != eq.terms.len() {
                return Err(CliError::Config(format!(
                    "analysis.comparison has {} entries, the equation has {} terms",
                    r1.len(),
                    eq.terms.len()
                )));
            }
        }
        if self.history.is_some() {
            self.history()?;
        }
        let a = &self.analysis;
        for (name, v) in [("analysis.tol", a.tol), ("analysis.grid_step", a.grid_step), ("analysis.eps0", a.eps0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if a.window.is_some() {
            self.window()?;
        }
        if let Some(w) = &a.witness {
            parse_fn("analysis.witness", w)?;
        }
        for (i, h) in a.witness_histories.iter().enumerate() {
            history_from(h, &format!("analysis.witness_histories[{i}]"), self.t0()?)?;
        }
        if !matches!(a.strategy.as_str(), "thm22" | "conjugate-scan" | "assume") {
            return Err(CliError::Config(format!(
                "analysis.strategy must be thm22, conjugate-scan or assume, got {}",
                a.strategy
            )));
        }
        for p in self.partitions()? {
            if !(p[0] < p[1] && p[1] <= p[2] && p[2] < p[3]) {
                return Err(CliError::Config(format!("partition {p:?} must satisfy t1 < t2 <= t3 < t4")));
            }
        }
        if let Some(w) = &self.wong {
            parse_fn("wong.d", &w.d)?;
            parse_fn("wong.r", &w.r)?;
            parse_fn("wong.g", &w.g)?;
            if !(w.tol >= 0.0) {
                return Err(CliError::Config(format!("wong.tol must be non-negative, got {}", w.tol)));
            }
        }
        Ok(())
    }
}

pub fn history_from(h: &HistoryBlock, field: &str, t0: f64) -> Result<HistorySpec, CliError> {
    let t1 = match &h.t1 {
        Some(n) => n.resolve(&format!("{field}.t1"))?,
        None => t0,
    };
    Ok(HistorySpec::new(t1, parse_fn(&format!("{field}.theta"), &h.theta)?, h.zeta.resolve(&format!("{field}.zeta"))?))
}

pub fn resolve4(p: &[Num; 4], field: &str) -> Result<[f64; 4], CliError> {
    Ok([
        p[0].resolve(&format!("{field}[0]"))?,
        p[1].resolve(&format!("{field}[1]"))?,
        p[2].resolve(&format!("{field}[2]"))?,
        p[3].resolve(&format!("{field}[3]"))?,
    ])
}

pub fn resolve2(p: &[Num; 2], field: &str) -> Result<(f64, f64), CliError> {
    Ok((p[0].resolve(&format!("{field}[0]"))?, p[1].resolve(&format!("{field}[1]"))?))
}
