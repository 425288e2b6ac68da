//! Truncated Taylor data (value, gradient, Hessian, third derivatives).

use serde::{Deserialize, Serialize};

use crate::error::{QmlError, Result};

/// Derivatives of a scalar function up to `order` at one point.
///
/// Storage is dense: `hessian` is `dim*dim` row-major and `third` is
/// `dim^3`; both are filled symmetrically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub order: usize,
    pub dim: usize,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub third: Option<Vec<f64>>,
}

impl Jet {
    pub fn zeros(dim: usize, order: usize) -> Jet {
        Jet {
            order,
            dim,
            value: 0.0,
            gradient: if order >= 1 { vec![0.0; dim] } else { Vec::new() },
            hessian: if order >= 2 { vec![0.0; dim * dim] } else { Vec::new() },
            third: if order >= 3 {
                Some(vec![0.0; dim * dim * dim])
            } else {
                None
            },
        }
    }

    #[inline]
    pub fn d1(&self, i: usize) -> f64 {
        self.gradient[i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim + j]
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third.as_ref().expect("third derivatives not computed")[(i * self.dim + j) * self.dim + k]
    }

    pub(crate) fn set_d2(&mut self, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.hessian[i * d + j] = v;
        self.hessian[j * d + i] = v;
    }

    pub(crate) fn set_d3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let d = self.dim;
        let t = self.third.as_mut().expect("third derivatives not allocated");
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            t[(a * d + b) * d + c] = v;
        }
    }

    /// Drop derivative data above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let mut out = self.clone();
        out.order = order.min(self.order);
        if order < 3 {
            out.third = None;
        }
        if order < 2 {
            out.hessian.clear();
        }
        if order < 1 {
            out.gradient.clear();
        }
        out
    }

    /// Jet of the partial derivative along slot `i`, one order lower.
    pub fn partial(&self, i: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(QmlError::Order(0));
        }
        let d = self.dim;
        let mut out = Jet::zeros(d, self.order - 1);
        out.value = self.d1(i);
        if out.order >= 1 {
            for j in 0..d {
                out.gradient[j] = self.d2(i, j);
            }
        }
        if out.order >= 2 {
            for j in 0..d {
                for k in 0..d {
                    out.hessian[j * d + k] = self.d3(i, j, k);
                }
            }
        }
        Ok(out)
    }

    fn check_compatible(&self, o: &Jet) -> Result<usize> {
        if self.dim != o.dim {
            return Err(QmlError::Dimension(format!(
                "jet dimensions {} and {} differ",
                self.dim, o.dim
            )));
        }
        Ok(self.order.min(o.order))
    }

    pub fn add(&self, o: &Jet) -> Result<Jet> {
        self.lin(o, 1.0)
    }

    pub fn sub(&self, o: &Jet) -> Result<Jet> {
        self.lin(o, -1.0)
    }

    fn lin(&self, o: &Jet, c: f64) -> Result<Jet> {
        let order = self.check_compatible(o)?;
        let a = self.truncate(order);
        let b = o.truncate(order);
        let zip = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + c * q).collect::<Vec<_>>();
        Ok(Jet {
            order,
            dim: self.dim,
            value: a.value + c * b.value,
            gradient: zip(&a.gradient, &b.gradient),
            hessian: zip(&a.hessian, &b.hessian),
            third: match (&a.third, &b.third) {
                (Some(x), Some(y)) => Some(zip(x, y)),
                _ => None,
            },
        })
    }

    /// Product rule to the common order of the two factors.
    pub fn mul(&self, o: &Jet) -> Result<Jet> {
        let order = self.check_compatible(o)?;
        let d = self.dim;
        let (f, g) = (self, o);
        let mut out = Jet::zeros(d, order);
        out.value = f.value * g.value;
        if order >= 1 {
            for i in 0..d {
                out.gradient[i] = f.d1(i) * g.value + f.value * g.d1(i);
            }
        }
        if order >= 2 {
            for i in 0..d {
                for j in i..d {
                    let v = f.d2(i, j) * g.value + f.d1(i) * g.d1(j) + f.d1(j) * g.d1(i) + f.value * g.d2(i, j);
                    out.set_d2(i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..d {
                for j in i..d {
                    for k in j..d {
                        let v = f.d3(i, j, k) * g.value
                            + f.d2(i, j) * g.d1(k)
                            + f.d2(i, k) * g.d1(j)
                            + f.d2(j, k) * g.d1(i)
                            + f.d1(i) * g.d2(j, k)
                            + f.d1(j) * g.d2(i, k)
                            + f.d1(k) * g.d2(i, j)
                            + f.value * g.d3(i, j, k);
                        out.set_d3(i, j, k, v);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Jet {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect::<Vec<_>>();
        Jet {
            order: self.order,
            dim: self.dim,
            value: c * self.value,
            gradient: s(&self.gradient),
            hessian: s(&self.hessian),
            third: self.third.as_deref().map(s),
        }
    }
}
