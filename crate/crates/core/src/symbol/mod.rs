//! Symbols on phase space and their exact jets.
//!
//! Coordinates follow one global convention: `x1 = t`, `xn = r`, the
//! middle coordinates are `y'`; on the dual side `xi1 = tau`, `xin = nu`
//! and the middle ones are `eta'`.

pub mod bracket;
pub mod dual;
pub mod expr;
pub mod jet;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bracket::{bracket_jets, poisson_bracket, PhaseFn};
pub use expr::{parse_expr, Expr, Var, VarKind};
pub use jet::Jet;

use crate::error::{QmlError, Result};
use dual::{lift1, lift2, lift3, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    PhaseSpace,
    BaseSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    ModelFold,
    FlatElliptic,
}

impl Builtin {
    pub fn from_name(name: &str) -> Result<Builtin> {
        match name {
            "model-fold" => Ok(Builtin::ModelFold),
            "flat-elliptic" => Ok(Builtin::FlatElliptic),
            _ => Err(QmlError::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::ModelFold => "model-fold",
            Builtin::FlatElliptic => "flat-elliptic",
        }
    }
}

/// A smooth real function of `(x, xi)` in dimension `n`.
#[derive(Clone, Debug)]
pub struct SymbolFn {
    pub n: usize,
    pub expr: Arc<Expr>,
    pub arity: Arity,
    pub builtin: Option<Builtin>,
    // slots that actually occur; derivatives along the rest vanish
    used: Arc<Vec<usize>>,
}

impl SymbolFn {
    pub fn from_expr(expr: Expr, n: usize) -> Result<SymbolFn> {
        if n < 2 {
            return Err(QmlError::Dimension(format!("dimension must be at least 2, got {}", n)));
        }
        let mut used = vec![false; 2 * n];
        let mut has_xi = false;
        let mut bad = None;
        expr.visit_vars(&mut |v| {
            if v.index >= n {
                bad = Some(v.index + 1);
                return;
            }
            used[v.slot(n)] = true;
            has_xi |= v.kind == VarKind::Xi;
        });
        if let Some(i) = bad {
            return Err(QmlError::Dimension(format!("variable index {} exceeds n = {}", i, n)));
        }
        Ok(SymbolFn {
            n,
            expr: Arc::new(expr),
            arity: if has_xi { Arity::PhaseSpace } else { Arity::BaseSpace },
            builtin: None,
            used: Arc::new((0..2 * n).filter(|&s| used[s]).collect()),
        })
    }

    /// Pointwise product, used for Leibniz-rule checks and gauge changes.
    pub fn mul(&self, other: &SymbolFn) -> Result<SymbolFn> {
        if self.n != other.n {
            return Err(QmlError::Dimension(format!(
                "product of symbols in dimensions {} and {}",
                self.n, other.n
            )));
        }
        SymbolFn::from_expr(
            Expr::Mul(Box::new((*self.expr).clone()), Box::new((*other.expr).clone())),
            self.n,
        )
    }

    pub fn value(&self, pt: &PhasePoint) -> Result<f64> {
        self.check_point(pt)?;
        let z = pt.concat();
        self.expr.eval(&z, self.n)
    }

    fn check_point(&self, pt: &PhasePoint) -> Result<()> {
        if pt.x.len() != self.n || pt.xi.len() != self.n {
            return Err(QmlError::Dimension(format!(
                "point has ({}, {}) coordinates, symbol has n = {}",
                pt.x.len(),
                pt.xi.len(),
                self.n
            )));
        }
        if !pt.is_finite() {
            return Err(QmlError::Domain("non-finite coordinate".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SymbolFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// A point `(x, xi)` of phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> PhasePoint {
        PhasePoint { x, xi }
    }

    pub fn origin(n: usize) -> PhasePoint {
        PhasePoint::new(vec![0.0; n], vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.xi);
        z
    }

    pub fn from_concat(z: &[f64]) -> PhasePoint {
        let n = z.len() / 2;
        PhasePoint::new(z[..n].to_vec(), z[n..].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }

    pub fn t(&self) -> f64 {
        self.x[0]
    }
    pub fn r(&self) -> f64 {
        self.x[self.dim() - 1]
    }
    pub fn tau(&self) -> f64 {
        self.xi[0]
    }
    pub fn nu(&self) -> f64 {
        self.xi[self.dim() - 1]
    }
}

pub fn parse_symbol(text: &str, n: usize) -> Result<SymbolFn> {
    if n < 2 {
        return Err(QmlError::Dimension(format!("dimension must be at least 2, got {}", n)));
    }
    SymbolFn::from_expr(parse_expr(text, n)?, n)
}

pub fn builtin_symbol(name: &str, n: usize) -> Result<SymbolFn> {
    let tag = Builtin::from_name(name)?;
    let text = match tag {
        Builtin::ModelFold => {
            let mut s = format!("xi1 - x{}", n);
            for i in 2..=n {
                s.push_str(&format!(" - xi{}^2", i));
            }
            s
        }
        Builtin::FlatElliptic => {
            let terms: Vec<String> = (1..=n).map(|i| format!("xi{}^2", i)).collect();
            format!("{} - 1", terms.join(" + "))
        }
    };
    let mut f = parse_symbol(&text, n)?;
    f.builtin = Some(tag);
    Ok(f)
}

/// Exact derivatives of `f` at `pt` up to `order` (at most 3).
pub fn eval_jet(f: &SymbolFn, pt: &PhasePoint, order: usize) -> Result<Jet> {
    if order > 3 {
        return Err(QmlError::Order(order));
    }
    f.check_point(pt)?;
    let n = f.n;
    let d = 2 * n;
    let z = pt.concat();
    let mut jet = Jet::zeros(d, order);
    jet.value = f.expr.eval(&z, n)?;
    let used = &f.used;

    if order == 1 {
        for &i in used.iter() {
            let zz: Vec<_> = z.iter().enumerate().map(|(s, &v)| lift1(v, s == i)).collect();
            jet.gradient[i] = f.expr.eval(&zz, n)?.eps;
        }
    }
    if order >= 2 {
        for (a, &i) in used.iter().enumerate() {
            for &j in &used[a..] {
                let zz: Vec<_> = z.iter().enumerate().map(|(s, &v)| lift2(v, s == i, s == j)).collect();
                let r = f.expr.eval(&zz, n)?;
                if i == j {
                    jet.gradient[i] = r.re.eps;
                }
                jet.set_d2(i, j, r.eps.eps);
            }
        }
    }
    if order == 3 {
        for (a, &i) in used.iter().enumerate() {
            for (b, &j) in used.iter().enumerate().skip(a) {
                for &k in &used[b..] {
                    let zz: Vec<_> = z
                        .iter()
                        .enumerate()
                        .map(|(s, &v)| lift3(v, s == i, s == j, s == k))
                        .collect();
                    let r = f.expr.eval(&zz, n)?;
                    jet.set_d3(i, j, k, r.eps.eps.eps);
                }
            }
        }
    }
    Ok(jet)
}

/// Gradient only, the hot path for flow integration.
pub fn eval_gradient(f: &SymbolFn, pt: &PhasePoint) -> Result<Vec<f64>> {
    Ok(eval_jet(f, pt, 1)?.gradient)
}

// Lets generic code evaluate an expression on any scalar without a SymbolFn.
pub fn eval_scalar<T: Scalar>(f: &SymbolFn, z: &[T]) -> Result<T> {
    f.expr.eval(z, f.n)
}
