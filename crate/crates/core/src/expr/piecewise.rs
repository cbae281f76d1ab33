use std::fmt;

use super::ast::{fmt_num, Expr, Func};
use super::jet::Jet;
use super::{EvalError, ScalarFn};

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub expr: Expr,
}

/// A function of `t` given by consecutive pieces.
///
/// Pieces are contiguous and non-overlapping. At an interior breakpoint the
/// value is taken from the piece that starts there (right-continuous); the
/// closure flags only decide whether the outer domain ends are included.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    pieces: Vec<Piece>,
}

impl PiecewiseFn {
    pub(crate) fn from_pieces(pieces: Vec<Piece>) -> PiecewiseFn {
        debug_assert!(!pieces.is_empty());
        PiecewiseFn { pieces }
    }

    /// A single expression valid on the whole real line.
    pub fn from_expr(expr: Expr) -> PiecewiseFn {
        PiecewiseFn {
            pieces: vec![Piece { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_closed: false, hi_closed: false, expr }],
        }
    }

    pub fn constant(c: f64) -> PiecewiseFn {
        PiecewiseFn::from_expr(Expr::Num(c))
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    /// The constant value when every piece is the same constant.
    pub fn as_constant(&self) -> Option<f64> {
        let mut val = None;
        for p in &self.pieces {
            if !p.expr.is_constant() {
                return None;
            }
            let v = p.expr.eval(0.0).ok()?;
            match val {
                None => val = Some(v),
                Some(u) if u == v => {}
                _ => return None,
            }
        }
        val
    }

    /// True when the function is literally `t` on its whole domain.
    pub fn is_identity(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].expr == Expr::Var
    }

    fn locate(&self, t: f64) -> Result<&Piece, EvalError> {
        if t.is_nan() {
            return Err(EvalError::NonFinite { t });
        }
        let idx = self.pieces.partition_point(|p| p.lo <= t);
        if idx == 0 {
            let first = &self.pieces[0];
            if t == first.lo && first.lo_closed {
                return Ok(first);
            }
            return Err(EvalError::OutsideDomain { t });
        }
        let piece = &self.pieces[idx - 1];
        if t == piece.lo && !piece.lo_closed && idx == 1 {
            return Err(EvalError::OutsideDomain { t });
        }
        if t < piece.hi || (t == piece.hi && piece.hi_closed) {
            Ok(piece)
        } else {
            Err(EvalError::OutsideDomain { t })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.locate(t)?.expr.eval(t)
    }

    /// Limit from the left at `t`; differs from [`eval`](Self::eval) only at
    /// interior breakpoints.
    pub fn eval_left_limit(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.left_piece(t)?.expr.eval(t)?)
    }

    fn left_piece(&self, t: f64) -> Result<&Piece, EvalError> {
        let idx = self.pieces.partition_point(|p| p.lo < t);
        if idx == 0 {
            return self.locate(t);
        }
        let piece = &self.pieces[idx - 1];
        if t <= piece.hi {
            Ok(piece)
        } else {
            Err(EvalError::OutsideDomain { t })
        }
    }

    pub fn eval_jet(&self, t: f64) -> Result<Jet, EvalError> {
        self.locate(t)?.expr.eval_jet(t)
    }

    pub fn eval_jet_left_limit(&self, t: f64) -> Result<Jet, EvalError> {
        self.left_piece(t)?.expr.eval_jet(t)
    }

    /// Finite piece boundaries and constant `ind` edges, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.pieces {
            if p.lo.is_finite() {
                out.push(p.lo);
            }
            if p.hi.is_finite() {
                out.push(p.hi);
            }
            p.expr.indicator_edges(&mut out);
        }
        out.retain(|v| v.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Pointwise `max(0, f)`.
    pub fn positive_part(&self) -> PiecewiseFn {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let expr = match p.expr.as_num() {
                    Some(c) => Expr::Num(c.max(0.0)),
                    None => Expr::call(Func::Max, vec![Expr::Num(0.0), p.expr.clone()]),
                };
                Piece { expr, ..p.clone() }
            })
            .collect();
        PiecewiseFn { pieces }
    }

    /// Apply `f` to every piece expression, keeping the breakpoints.
    pub fn map_exprs(&self, f: impl Fn(&Expr) -> Expr) -> PiecewiseFn {
        PiecewiseFn {
            pieces: self.pieces.iter().map(|p| Piece { expr: f(&p.expr), ..p.clone() }).collect(),
        }
    }
}

impl Expr {
    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.as_num().map(|v| -v),
            _ => None,
        }
    }
}

impl ScalarFn for PiecewiseFn {
    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        PiecewiseFn::eval(self, t)
    }

    fn eval_left(&self, t: f64) -> Result<f64, EvalError> {
        self.eval_left_limit(t)
    }

    fn breakpoints_in(&self, a: f64, b: f64) -> Vec<f64> {
        self.breakpoints().into_iter().filter(|&x| x > a && x < b).collect()
    }
}

impl fmt::Display for PiecewiseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.len() == 1 && self.pieces[0].lo == f64::NEG_INFINITY && self.pieces[0].hi == f64::INFINITY {
            return write!(f, "{}", self.pieces[0].expr);
        }
        write!(f, "piecewise ")?;
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, " ; ")?;
            }
            write!(f, "{}", if p.lo_closed { '[' } else { '(' })?;
            fmt_num(p.lo, f)?;
            write!(f, ", ")?;
            fmt_num(p.hi, f)?;
            write!(f, "{}: {}", if p.hi_closed { ']' } else { ')' }, p.expr)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use std::f64::consts::PI;

    #[test]
    fn right_continuous_with_left_limit() {
        let f = parse("piecewise (-inf, 1): t ; [1, inf): 5").unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 5.0);
        assert_eq!(f.eval_left_limit(1.0).unwrap(), 1.0);
        assert_eq!(f.eval_left_limit(0.5).unwrap(), 0.5);
        assert_eq!(f.breakpoints(), vec![1.0]);
    }

    #[test]
    fn open_domain_ends() {
        let f = parse("piecewise (0, 1): 1 ; [1, 2): 2").unwrap();
        assert!(f.eval(0.0).is_err());
        assert!(f.eval(2.0).is_err());
        assert_eq!(f.eval(1.999).unwrap(), 2.0);
        assert_eq!(f.eval_left_limit(2.0).unwrap(), 2.0);
    }

    #[test]
    fn positive_part_examples() {
        let f = parse("-1").unwrap().positive_part();
        assert_eq!(f.eval(3.0).unwrap(), 0.0);
        let f = parse("sin(t)^2").unwrap().positive_part();
        assert!((f.eval(1.0).unwrap() - 1f64.sin().powi(2)).abs() < 1e-15);
        let f = parse("cos(t)").unwrap().positive_part();
        assert_eq!(f.eval(PI).unwrap(), 0.0);
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn indicator_edges_are_breakpoints() {
        let f = parse("2*ind(1, 3*pi) + t").unwrap();
        assert_eq!(f.breakpoints(), vec![1.0, 3.0 * PI]);
        assert_eq!(f.eval(1.0).unwrap(), 3.0);
        assert_eq!(f.eval(0.5).unwrap(), 0.5);
    }

    #[test]
    fn jets_match_closed_forms() {
        let f = parse("sin(t)^2 + exp(2*t) / (1 + t)").unwrap();
        let t = 0.7f64;
        let j = f.eval_jet(t).unwrap();
        let g = |t: f64| (2.0 * t).exp() / (1.0 + t);
        let g1 = |t: f64| (2.0 * t).exp() * (2.0 * (1.0 + t) - 1.0) / (1.0 + t).powi(2);
        assert!((j.v - (t.sin().powi(2) + g(t))).abs() < 1e-13);
        assert!((j.d1 - ((2.0 * t).sin() + g1(t))).abs() < 1e-12);
        let h = 1e-4;
        let fd2 = (f.eval(t + h).unwrap() - 2.0 * f.eval(t).unwrap() + f.eval(t - h).unwrap()) / (h * h);
        assert!((j.d2 - fd2).abs() < 1e-5);
    }

    #[test]
    fn constant_detection() {
        assert_eq!(parse("2").unwrap().as_constant(), Some(2.0));
        assert_eq!(parse("piecewise (-inf,0): 1 ; [0,inf): 1").unwrap().as_constant(), Some(1.0));
        assert_eq!(parse("t").unwrap().as_constant(), None);
        assert!(parse("t").unwrap().is_identity());
    }
}
