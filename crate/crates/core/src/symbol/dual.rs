//! Nestable dual numbers.
//!
//! `Dual<T>` carries a value and one infinitesimal component. Nesting
//! (`Dual<Dual<Dual<f64>>>`) gives mixed partials up to third order from a
//! single evaluation seeded along three (possibly equal) coordinate
//! directions.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate a symbol expression.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// Nesting depth: 0 for `f64`, 1 for `Dual<f64>`, ...
    const DEPTH: usize;

    fn constant(v: f64) -> Self;
    /// The underlying real value (all infinitesimal parts dropped).
    fn re(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, r: f64) -> Self;

    fn scale(&self, k: f64) -> Self {
        self.clone() * Self::constant(k)
    }
}

impl Scalar for f64 {
    const DEPTH: usize = 0;

    fn constant(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, r: f64) -> Self {
        f64::powf(*self, r)
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// A variable seeded with unit (or zero) infinitesimal part.
    pub fn seed(re: T, active: bool) -> Self {
        let eps = T::constant(if active { 1.0 } else { 0.0 });
        Dual { re, eps }
    }

    // chain rule: f(re + eps) = f(re) + f'(re) eps
    fn chain(&self, value: T, deriv: T) -> Self {
        Dual {
            re: value,
            eps: self.eps.clone() * deriv,
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            eps: self.eps + o.eps,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            eps: self.eps - o.eps,
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            eps: self.re.clone() * o.eps + self.eps * o.re.clone(),
            re: self.re * o.re,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::constant(1.0) / o.re.clone();
        let re = self.re.clone() * inv.clone();
        let eps = (self.eps - re.clone() * o.eps) * inv;
        Dual { re, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: -self.eps,
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    const DEPTH: usize = T::DEPTH + 1;

    fn constant(v: f64) -> Self {
        Dual {
            re: T::constant(v),
            eps: T::constant(0.0),
        }
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        let d = T::constant(1.0) / self.re.clone();
        self.chain(self.re.ln(), d)
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        let d = T::constant(0.5) / s.clone();
        self.chain(s, d)
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        let d = self.re.powi(n - 1).scale(n as f64);
        self.chain(self.re.powi(n), d)
    }
    fn powf(&self, r: f64) -> Self {
        let d = self.re.powf(r - 1.0).scale(r);
        self.chain(self.re.powf(r), d)
    }
    fn scale(&self, k: f64) -> Self {
        Dual {
            re: self.re.scale(k),
            eps: self.eps.scale(k),
        }
    }
}

pub type D1 = Dual<f64>;
pub type D2 = Dual<D1>;
pub type D3 = Dual<D2>;

/// Lift a real coordinate into a first-order dual seeded along `active`.
pub fn lift1(v: f64, a: bool) -> D1 {
    D1::seed(v, a)
}

/// Second-order lift: infinitesimal 1 along `a`, infinitesimal 2 along `b`.
pub fn lift2(v: f64, a: bool, b: bool) -> D2 {
    Dual::new(lift1(v, a), D1::constant(if b { 1.0 } else { 0.0 }))
}

/// Third-order lift with three independent seeds.
pub fn lift3(v: f64, a: bool, b: bool, c: bool) -> D3 {
    Dual::new(lift2(v, a, b), D2::constant(if c { 1.0 } else { 0.0 }))
}
