//! Expression trees for symbols, with a small recursive-descent parser.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;            (* right associative *)
//! primary = number | variable | "pi"
//!         | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "log" | "sqrt" | "sin" | "cos" ;
//! variable= "x" digits | "xi" digits ;         (* 1-based index ≤ n *)
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `-x^2` parses as `-(x^2)`. There are no conditionals, so every symbol is
//! smooth wherever its elementary functions are.

use std::fmt;

use super::dual::Scalar;
use crate::error::{QmlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    X,
    Xi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    /// Zero-based coordinate index.
    pub index: usize,
}

impl Var {
    /// Slot in the concatenated phase-space vector `(x_1..x_n, xi_1..xi_n)`.
    pub fn slot(&self, n: usize) -> usize {
        match self.kind {
            VarKind::X => self.index,
            VarKind::Xi => n + self.index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Value of a subtree that contains no variables.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            Expr::Add(a, b) => Some(a.constant_value()? + b.constant_value()?),
            Expr::Sub(a, b) => Some(a.constant_value()? - b.constant_value()?),
            Expr::Mul(a, b) => Some(a.constant_value()? * b.constant_value()?),
            Expr::Div(a, b) => Some(a.constant_value()? / b.constant_value()?),
            Expr::Pow(a, b) => Some(a.constant_value()?.powf(b.constant_value()?)),
            Expr::Call(f, a) => {
                let v = a.constant_value()?;
                Some(match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                })
            }
        }
    }

    pub fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Replace every variable by an expression.
    pub fn substitute(&self, map: &impl Fn(Var) -> Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => map(*v),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Pow(a, b) => Expr::Pow(sub(a), sub(b)),
            Expr::Call(f, a) => Expr::Call(*f, sub(a)),
        }
    }

    /// Evaluate over any scalar type. `z` is the concatenated `(x, xi)` vector.
    pub fn eval<T: Scalar>(&self, z: &[T], n: usize) -> Result<T> {
        Ok(match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var(v) => z[v.slot(n)].clone(),
            Expr::Neg(a) => -a.eval(z, n)?,
            Expr::Add(a, b) => a.eval(z, n)? + b.eval(z, n)?,
            Expr::Sub(a, b) => a.eval(z, n)? - b.eval(z, n)?,
            Expr::Mul(a, b) => a.eval(z, n)? * b.eval(z, n)?,
            Expr::Div(a, b) => {
                let den = b.eval(z, n)?;
                if den.re() == 0.0 {
                    return Err(QmlError::Domain(format!("division by zero in '{}'", self)));
                }
                a.eval(z, n)? / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(z, n)?;
                match b.constant_value() {
                    Some(e) if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 => {
                        if e < 0.0 && base.re() == 0.0 {
                            return Err(QmlError::Domain(format!("zero to a negative power in '{}'", self)));
                        }
                        base.powi(e as i32)
                    }
                    Some(e) => {
                        if base.re() < 0.0 || (base.re() == 0.0 && (T::DEPTH > 0 || e < 0.0)) {
                            return Err(QmlError::Domain(format!(
                                "non-integer power of non-positive base in '{}'",
                                self
                            )));
                        }
                        base.powf(e)
                    }
                    None => {
                        if base.re() <= 0.0 {
                            return Err(QmlError::Domain(format!(
                                "variable exponent needs a positive base in '{}'",
                                self
                            )));
                        }
                        (b.eval(z, n)? * base.ln()).exp()
                    }
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(z, n)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Log => {
                        if v.re() <= 0.0 {
                            return Err(QmlError::Domain(format!("log of non-positive value in '{}'", self)));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v.re() < 0.0 || (v.re() == 0.0 && T::DEPTH > 0) {
                            return Err(QmlError::Domain(format!("sqrt at or below zero in '{}'", self)));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }
}

// Binding strength used by the printer to decide on parentheses.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var(v) => match v.kind {
                VarKind::X => write!(f, "x{}", v.index + 1),
                VarKind::Xi => write!(f, "xi{}", v.index + 1),
            },
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_wrapped(f, a, precedence(a) < 4)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                write_wrapped(f, a, precedence(a) < 1)?;
                write!(f, "{}", if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                write_wrapped(f, b, precedence(b) <= 1 || precedence(b) == 3)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                write_wrapped(f, a, precedence(a) < 2 || precedence(a) == 3)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                write_wrapped(f, b, precedence(b) <= 3)
            }
            Expr::Pow(a, b) => {
                write_wrapped(f, a, precedence(a) <= 4)?;
                write!(f, "^")?;
                write_wrapped(f, b, precedence(b) < 4 || precedence(b) == 3)
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && (bytes[i + 1] as char).is_ascii_digit()) {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| QmlError::Syntax {
                pos: start,
                msg: format!("malformed number '{}'", text),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(QmlError::Syntax {
                        pos: i,
                        msg: format!("unexpected character '{}'", c),
                    })
                }
            };
            out.push((i, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    n: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.src.len())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(QmlError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.at += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.at += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.at += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.at += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(e)
                    }
                    _ => self.err("expected ')'"),
                }
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if let Some(func) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return self.err(format!("expected '(' after function '{}'", name));
                    }
                    self.at += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(&Tok::RParen) {
                        return self.err("expected ')'");
                    }
                    self.at += 1;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                self.variable(&name, pos)
            }
            Some(t) => self.err(format!("unexpected token {:?}", t)),
            None => self.err("unexpected end of input"),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Expr> {
        let (kind, digits) = if let Some(d) = name.strip_prefix("xi") {
            (VarKind::Xi, d)
        } else if let Some(d) = name.strip_prefix('x') {
            (VarKind::X, d)
        } else {
            return Err(QmlError::Syntax {
                pos,
                msg: format!("unknown identifier '{}'", name),
            });
        };
        let idx: usize = match digits.parse() {
            Ok(i) if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) => i,
            _ => {
                return Err(QmlError::Syntax {
                    pos,
                    msg: format!("unknown identifier '{}'", name),
                })
            }
        };
        if idx == 0 || idx > self.n {
            return Err(QmlError::Dimension(format!(
                "variable '{}' at position {} exceeds dimension n = {}",
                name, pos, self.n
            )));
        }
        Ok(Expr::Var(Var { kind, index: idx - 1 }))
    }
}

/// Parse `text` as an expression over `x1..xn, xi1..xin`.
pub fn parse_expr(text: &str, n: usize) -> Result<Expr> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        n,
        src: text,
    };
    if p.toks.is_empty() {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, z: &[f64], n: usize) -> f64 {
        parse_expr(text, n).unwrap().eval(z, n).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let z = [2.0, 3.0, 0.0, 0.0];
        assert_eq!(ev("x1 + x2 * 2", &z, 2), 8.0);
        assert_eq!(ev("-x1^2", &z, 2), -4.0);
        assert_eq!(ev("x1^x2^0", &z, 2), 2.0);
        assert_eq!(ev("2^3^2", &z, 2), 512.0);
        assert_eq!(ev("x2 - x1 - 1", &z, 2), 0.0);
        assert_eq!(ev("x2 / x1 / 3", &z, 2), 0.5);
        assert!((ev("1.5e-1 * 2E1", &z, 2) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_expr("x1 + * x2", 2) {
            Err(QmlError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {:?}", other),
        }
        assert!(matches!(parse_expr("foo(x1)", 2), Err(QmlError::Syntax { .. })));
        assert!(matches!(parse_expr("(x1", 2), Err(QmlError::Syntax { .. })));
        assert!(matches!(parse_expr("", 2), Err(QmlError::Syntax { .. })));
        assert!(matches!(parse_expr("x1 $", 2), Err(QmlError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn out_of_range_variable_is_dimension_error() {
        assert!(matches!(parse_expr("xi3", 2), Err(QmlError::Dimension(_))));
        assert!(matches!(parse_expr("x0", 2), Err(QmlError::Dimension(_))));
    }

    #[test]
    fn domain_errors() {
        let z = [0.0, -1.0, 0.0, 0.0];
        let n = 2;
        assert!(matches!(
            parse_expr("1/x1", n).unwrap().eval(&z, n),
            Err(QmlError::Domain(_))
        ));
        assert!(matches!(
            parse_expr("sqrt(x2)", n).unwrap().eval(&z, n),
            Err(QmlError::Domain(_))
        ));
        assert!(matches!(
            parse_expr("log(x1)", n).unwrap().eval(&z, n),
            Err(QmlError::Domain(_))
        ));
        // integer powers of negative numbers are fine
        assert_eq!(parse_expr("x2^3", n).unwrap().eval(&z, n).unwrap(), -1.0);
    }

    #[test]
    fn printing_reparses_to_same_tree_values() {
        for src in [
            "xi1 - x2 - xi2^2",
            "-(x1 + x2)^2 / (1 - xi1)",
            "exp(-x1^2) * sin(xi2 - 3) - (-2)",
            "x1 - (x2 - xi1)",
            "x1 / (x2 * xi1)",
            "(-x1)^2",
            "2^(-x1)",
        ] {
            let e = parse_expr(src, 2).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&printed, 2).unwrap();
            let z = [0.3, 0.7, 1.1, -0.4];
            assert_eq!(
                e.eval(&z, 2).unwrap(),
                again.eval(&z, 2).unwrap(),
                "{} vs {}",
                src,
                printed
            );
        }
    }
}
