//! Recursive-descent parser for the coefficient language.
//!
//! ```text
//! source    := piecewise | expr
//! piecewise := "piecewise" piece (";" piece)*
//! piece     := ("[" | "(") expr "," expr ("]" | ")") ":" expr
//! expr      := term (("+" | "-") term)*
//! term      := unary (("*" | "/") unary)*
//! unary     := "-" unary | power
//! power     := atom ("^" unary)?
//! atom      := number name? | "t" | "pi" | "π" | "inf" | ident "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Piece bounds must not depend on `t`.

use super::ast::{BinOp, Expr, Func};
use super::piecewise::{Piece, PiecewiseFn};
use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    /// 1-based character column.
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError::new(col, ParseErrorKind::BadNumber(text.clone())))?;
            out.push(Token { tok: Tok::Num(v), col });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            if c == 'π' {
                i += 1;
            } else {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') && chars[i] != 'π' {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text), col });
        } else if "+-*/^()[],;:".contains(c) {
            out.push(Token { tok: Tok::Sym(c), col });
            i += 1;
        } else {
            return Err(ParseError::new(col, ParseErrorKind::UnexpectedChar(c)));
        }
    }
    out.push(Token { tok: Tok::End, col: chars.len() + 1 });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{c}'")))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".to_string(),
        };
        let kind = if t.tok == Tok::End {
            ParseErrorKind::UnexpectedEnd { expected: expected.to_string() }
        } else {
            ParseErrorKind::UnexpectedToken { expected: expected.to_string(), found }
        };
        ParseError::new(t.col, kind)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok.tok {
            Tok::Num(v) => {
                self.bump();
                // Implicit product with a following name: `3pi`, `2t^2`.
                if matches!(self.peek().tok, Tok::Ident(_)) {
                    let base = self.atom()?;
                    let rhs = if self.eat('^') { Expr::bin(BinOp::Pow, base, self.unary()?) } else { base };
                    return Ok(Expr::bin(BinOp::Mul, Expr::Num(v), rhs));
                }
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "t" => return Ok(Expr::Var),
                    "pi" | "π" => return Ok(Expr::Pi),
                    "inf" => return Ok(Expr::Num(f64::INFINITY)),
                    _ => {}
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::new(tok.col, ParseErrorKind::UnknownIdentifier(name)));
                };
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                if args.len() != func.arity() {
                    return Err(ParseError::new(
                        tok.col,
                        ParseErrorKind::WrongArity { func: func.name(), expected: func.arity(), found: args.len() },
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn bound(&mut self) -> Result<f64, ParseError> {
        let col = self.peek().col;
        let e = self.expr()?;
        if !e.is_constant() {
            return Err(ParseError::new(col, ParseErrorKind::BoundDependsOnT));
        }
        match e.eval_raw_for_bound() {
            Some(v) => Ok(v),
            None => Err(ParseError::new(col, ParseErrorKind::BadBound)),
        }
    }

    fn piecewise(&mut self) -> Result<PiecewiseFn, ParseError> {
        let mut pieces: Vec<Piece> = Vec::new();
        loop {
            let col = self.peek().col;
            let lo_closed = if self.eat('[') {
                true
            } else if self.eat('(') {
                false
            } else {
                return Err(self.unexpected("'[' or '('"));
            };
            let lo = self.bound()?;
            self.expect(',')?;
            let hi = self.bound()?;
            let hi_closed = if self.eat(']') {
                true
            } else if self.eat(')') {
                false
            } else {
                return Err(self.unexpected("']' or ')'"));
            };
            self.expect(':')?;
            let expr = self.expr()?;
            if !(lo < hi) {
                return Err(ParseError::new(col, ParseErrorKind::NonAscendingBreakpoints { lo, hi }));
            }
            if let Some(prev) = pieces.last() {
                if lo < prev.hi {
                    return Err(ParseError::new(col, ParseErrorKind::NonAscendingBreakpoints { lo: prev.hi, hi: lo }));
                }
                if lo > prev.hi || (!prev.hi_closed && !lo_closed) {
                    return Err(ParseError::new(col, ParseErrorKind::Gap { at: prev.hi }));
                }
                if prev.hi_closed && lo_closed {
                    return Err(ParseError::new(col, ParseErrorKind::Overlap { at: lo }));
                }
            }
            pieces.push(Piece { lo, hi, lo_closed: lo_closed && lo.is_finite(), hi_closed: hi_closed && hi.is_finite(), expr });
            if !self.eat(';') {
                break;
            }
        }
        Ok(PiecewiseFn::from_pieces(pieces))
    }
}

impl Expr {
    fn eval_raw_for_bound(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.eval_raw_for_bound().map(|v| -v),
            _ => self.eval(0.0).ok(),
        }
    }
}

/// Parse a source string into a piecewise function. A plain expression is
/// a single piece covering the whole real line.
pub fn parse(src: &str) -> Result<PiecewiseFn, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let f = if matches!(&p.peek().tok, Tok::Ident(s) if s == "piecewise") {
        p.bump();
        p.piecewise()?
    } else {
        PiecewiseFn::from_expr(p.expr()?)
    };
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(f)
}

/// Parse a single expression (no piecewise block).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

/// Parse a constant expression such as `3*pi + 1/2`.
pub fn parse_constant(src: &str) -> Result<f64, ParseError> {
    let e = parse_expr(src)?;
    if !e.is_constant() {
        return Err(ParseError::new(1, ParseErrorKind::BoundDependsOnT));
    }
    e.eval_raw_for_bound().ok_or(ParseError::new(1, ParseErrorKind::BadBound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_squared_at_half_pi() {
        let f = parse("sin(t)^2").unwrap();
        assert!((f.eval(PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nested_calls_at_zero() {
        let f = parse("cos(sin(ln(1+t)))").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn piecewise_lookup() {
        let f = parse("piecewise [0,1): 0 ; [1,3π]: 2").unwrap();
        assert_eq!(f.eval(2.0).unwrap(), 2.0);
        assert_eq!(f.eval(0.5).unwrap(), 0.0);
        assert_eq!(f.eval(1.0).unwrap(), 2.0);
        assert_eq!(f.eval(3.0 * PI).unwrap(), 2.0);
        assert!(f.eval(-0.1).is_err());
        assert!(f.eval(10.0).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_expr("-2^2").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), -4.0);
        let f = parse_expr("2^3^2").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 512.0);
        let f = parse_expr("8/4/2").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        let f = parse_expr("1 - 2 - 3").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), -4.0);
        let f = parse_expr("2^-1").unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 0.5);
        let f = parse_expr("1.5e-3*t").unwrap();
        assert_eq!(f.eval(2.0).unwrap(), 3e-3);
    }

    #[test]
    fn errors_carry_columns() {
        let e = parse("sin(t) + foo(t)").unwrap_err();
        assert_eq!(e.col, 10);
        assert!(matches!(e.kind, ParseErrorKind::UnknownIdentifier(ref s) if s == "foo"));

        let e = parse("sin(t").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnexpectedEnd { .. }));

        let e = parse("1 + # 2").unwrap_err();
        assert_eq!(e.col, 5);

        let e = parse("min(t)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::WrongArity { .. }));
    }

    #[test]
    fn piecewise_structure_errors() {
        assert!(matches!(
            parse("piecewise [1,0): 0").unwrap_err().kind,
            ParseErrorKind::NonAscendingBreakpoints { .. }
        ));
        assert!(matches!(
            parse("piecewise [0,2): 0 ; [1,3): 1").unwrap_err().kind,
            ParseErrorKind::NonAscendingBreakpoints { .. }
        ));
        assert!(matches!(parse("piecewise [0,1): 0 ; [2,3): 1").unwrap_err().kind, ParseErrorKind::Gap { .. }));
        assert!(matches!(parse("piecewise [0,1]: 0 ; [1,3): 1").unwrap_err().kind, ParseErrorKind::Overlap { .. }));
        assert!(matches!(parse("piecewise [0,t): 0").unwrap_err().kind, ParseErrorKind::BoundDependsOnT));
    }

    #[test]
    fn infinite_bounds() {
        let f = parse("piecewise (-inf, 0): 1 ; [0, inf): exp(-t)").unwrap();
        assert_eq!(f.eval(-1e6).unwrap(), 1.0);
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        assert!((f.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn constants() {
        assert!((parse_constant("3*pi + 1/2").unwrap() - (3.0 * PI + 0.5)).abs() < 1e-15);
        assert!(parse_constant("t").is_err());
    }
}
