//! Expression tree for scalar coefficient functions of `t`.

use std::fmt;

use super::jet::Jet;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Abs,
    Sqrt,
    Min,
    Max,
    /// `ind(lo, hi)` is 1 for `lo <= t < hi` and 0 elsewhere.
    Ind,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            "ind" => Func::Ind,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
            Func::Ind => "ind",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Ind => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The independent variable `t`.
    Var,
    Pi,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    /// True when the tree does not reference `t`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => true,
            Expr::Var => false,
            Expr::Neg(a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
        }
    }

    /// Value of the tree at `t`. Non-finite results are reported as errors.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = self.eval_raw(t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }

    fn eval_raw(&self, t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var => t,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval_raw(t)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval_raw(t)?;
                let y = b.eval_raw(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::Domain { t, what: "division by zero" });
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y, t)?,
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval_raw(t)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(EvalError::Domain { t, what: "ln of a non-positive argument" });
                        }
                        x.ln()
                    }
                    Func::Abs => x.abs(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::Domain { t, what: "sqrt of a negative argument" });
                        }
                        x.sqrt()
                    }
                    Func::Min => x.min(args[1].eval_raw(t)?),
                    Func::Max => x.max(args[1].eval_raw(t)?),
                    Func::Ind => {
                        let hi = args[1].eval_raw(t)?;
                        if x <= t && t < hi {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        })
    }

    /// Value together with first and second derivative in `t`.
    pub fn eval_jet(&self, t: f64) -> Result<Jet, EvalError> {
        let j = self.jet_raw(t)?;
        if j.v.is_finite() && j.d1.is_finite() && j.d2.is_finite() {
            Ok(j)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }

    fn jet_raw(&self, t: f64) -> Result<Jet, EvalError> {
        Ok(match self {
            Expr::Num(v) => Jet::constant(*v),
            Expr::Var => Jet::variable(t),
            Expr::Pi => Jet::constant(std::f64::consts::PI),
            Expr::Neg(a) => -a.jet_raw(t)?,
            Expr::Bin(op, a, b) => {
                let x = a.jet_raw(t)?;
                let y = b.jet_raw(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.v == 0.0 {
                            return Err(EvalError::Domain { t, what: "division by zero" });
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        if y.d1 == 0.0 && y.d2 == 0.0 {
                            let v = pow(x.v, y.v, t)?;
                            let c = y.v;
                            if c == 0.0 {
                                Jet::constant(1.0)
                            } else {
                                let g1 = c * pow(x.v, c - 1.0, t)?;
                                let g2 = if c == 1.0 { 0.0 } else { c * (c - 1.0) * pow(x.v, c - 2.0, t)? };
                                x.chain(v, g1, g2)
                            }
                        } else {
                            if x.v <= 0.0 {
                                return Err(EvalError::Domain { t, what: "variable exponent of a non-positive base" });
                            }
                            (y * x.ln()).exp()
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].jet_raw(t)?;
                match f {
                    Func::Sin => x.chain(x.v.sin(), x.v.cos(), -x.v.sin()),
                    Func::Cos => x.chain(x.v.cos(), -x.v.sin(), -x.v.cos()),
                    Func::Tan => {
                        let tn = x.v.tan();
                        let sec2 = 1.0 + tn * tn;
                        x.chain(tn, sec2, 2.0 * tn * sec2)
                    }
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x.v <= 0.0 {
                            return Err(EvalError::Domain { t, what: "ln of a non-positive argument" });
                        }
                        x.ln()
                    }
                    Func::Abs => {
                        let s = if x.v < 0.0 { -1.0 } else { 1.0 };
                        x.chain(x.v.abs(), s, 0.0)
                    }
                    Func::Sqrt => {
                        if x.v < 0.0 {
                            return Err(EvalError::Domain { t, what: "sqrt of a negative argument" });
                        }
                        let r = x.v.sqrt();
                        x.chain(r, 0.5 / r, -0.25 / (r * x.v))
                    }
                    Func::Min => {
                        let y = args[1].jet_raw(t)?;
                        if x.v <= y.v {
                            x
                        } else {
                            y
                        }
                    }
                    Func::Max => {
                        let y = args[1].jet_raw(t)?;
                        if x.v >= y.v {
                            x
                        } else {
                            y
                        }
                    }
                    Func::Ind => {
                        let hi = args[1].eval_raw(t)?;
                        Jet::constant(if x.v <= t && t < hi { 1.0 } else { 0.0 })
                    }
                }
            }
        })
    }

    /// Edges of `ind` calls whose bounds do not depend on `t`.
    pub fn indicator_edges(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Num(_) | Expr::Var | Expr::Pi => {}
            Expr::Neg(a) => a.indicator_edges(out),
            Expr::Bin(_, a, b) => {
                a.indicator_edges(out);
                b.indicator_edges(out);
            }
            Expr::Call(f, args) => {
                if *f == Func::Ind {
                    for a in args {
                        if a.is_constant() {
                            if let Ok(v) = a.eval(0.0) {
                                out.push(v);
                            }
                        }
                    }
                }
                for a in args {
                    a.indicator_edges(out);
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn pow(x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
    if y.fract() == 0.0 && y.abs() < 2_147_483_647.0 {
        if x == 0.0 && y < 0.0 {
            return Err(EvalError::Domain { t, what: "zero raised to a negative power" });
        }
        return Ok(x.powi(y as i32));
    }
    if x < 0.0 {
        return Err(EvalError::Domain { t, what: "negative base with non-integer exponent" });
    }
    if x == 0.0 && y < 0.0 {
        return Err(EvalError::Domain { t, what: "zero raised to a negative power" });
    }
    Ok(x.powf(y))
}

pub(crate) fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v == f64::INFINITY {
        write!(f, "inf")
    } else if v == f64::NEG_INFINITY {
        write!(f, "-inf")
    } else {
        write!(f, "{v:?}")
    }
}

fn write_child(child: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Var => write!(f, "t"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(a, 3, f)
            }
            Expr::Bin(op, a, b) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                    BinOp::Pow => (4, "^"),
                };
                if *op == BinOp::Pow {
                    write_child(a, 5, f)?;
                    write!(f, "{sym}")?;
                    write_child(b, 3, f)
                } else {
                    write_child(a, p, f)?;
                    write!(f, "{sym}")?;
                    write_child(b, p + 1, f)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
