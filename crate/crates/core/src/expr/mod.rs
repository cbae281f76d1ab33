//! Coefficient expression language: parsing, evaluation, quadrature and
//! sign-pattern search for the scalar functions that define an equation.

mod ast;
mod cumulative;
mod jet;
mod parser;
mod piecewise;
mod quad;
mod sign;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func};
pub use cumulative::CumulativeIntegral;
pub use jet::Jet;
pub use parser::{parse, parse_constant, parse_expr};
pub use piecewise::{Piece, PiecewiseFn};
pub use quad::{integrate, integrate_signed, quad, quad_fn, QuadError, DEFAULT_QUAD_TOL};
pub use sign::{find_sign_intervals, sign_runs, Sign, SignPattern, SignedInterval, DEFAULT_GRID_STEP, SIGN_SLACK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error at t = {t}: {what}")]
    Domain { t: f64, what: &'static str },
    #[error("t = {t} is outside the domain of the piecewise definition")]
    OutsideDomain { t: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("malformed number '{0}'")]
    BadNumber(String),
    #[error("expected {expected}, found {found}")]
    UnexpectedToken { expected: String, found: String },
    #[error("expected {expected}, found end of input")]
    UnexpectedEnd { expected: String },
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("{func} takes {expected} argument(s), found {found}")]
    WrongArity { func: &'static str, expected: usize, found: usize },
    #[error("breakpoints must ascend ({lo} is not below {hi})")]
    NonAscendingBreakpoints { lo: f64, hi: f64 },
    #[error("pieces leave a gap at {at}")]
    Gap { at: f64 },
    #[error("pieces overlap at {at}")]
    Overlap { at: f64 },
    #[error("piece bounds must not depend on t")]
    BoundDependsOnT,
    #[error("piece bound does not evaluate to a number")]
    BadBound,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("column {col}: {kind}")]
pub struct ParseError {
    /// 1-based character column in the source string.
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { col, kind }
    }
}

/// A real function of `t` that the integrators and checkers can sample.
pub trait ScalarFn: Send + Sync {
    fn eval(&self, t: f64) -> Result<f64, EvalError>;

    /// Limit from the left; the default assumes continuity.
    fn eval_left(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(t)
    }

    /// Points in the open interval `(a, b)` where the function or its
    /// derivatives may jump.
    fn breakpoints_in(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// Adapter turning a closure into a [`ScalarFn`].
pub struct FnCoefficient<F> {
    f: F,
    breaks: Vec<f64>,
}

impl<F> FnCoefficient<F>
where
    F: Fn(f64) -> Result<f64, EvalError> + Send + Sync,
{
    pub fn new(f: F, breaks: Vec<f64>) -> Self {
        FnCoefficient { f, breaks }
    }
}

impl<F> ScalarFn for FnCoefficient<F>
where
    F: Fn(f64) -> Result<f64, EvalError> + Send + Sync,
{
    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        (self.f)(t)
    }

    fn breakpoints_in(&self, a: f64, b: f64) -> Vec<f64> {
        self.breaks.iter().copied().filter(|&x| x > a && x < b).collect()
    }
}

/// Evaluate a coefficient just inside the left of `t` when `left` is set.
pub fn eval_side(f: &dyn ScalarFn, t: f64, left: bool) -> Result<f64, EvalError> {
    if left {
        f.eval_left(t)
    } else {
        f.eval(t)
    }
}
