//! Complex grid functions and the discrete semiclassical Fourier transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{QmlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Physical,
    Frequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub len: usize,
    pub kind: AxisKind,
    /// Origin of the conjugate axis, so that a round trip lands on the
    /// grid it started from.
    pub conj_origin: Option<f64>,
}

impl Axis {
    pub fn physical(origin: f64, spacing: f64, len: usize) -> Axis {
        Axis {
            origin,
            spacing,
            len,
            kind: AxisKind::Physical,
            conj_origin: None,
        }
    }

    /// Cell-centred axis covering `[lo, hi]` with `len` cells.
    pub fn midpoint(lo: f64, hi: f64, len: usize) -> Axis {
        let d = (hi - lo) / len as f64;
        Axis::physical(lo + 0.5 * d, d, len)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + self.spacing * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFn {
    pub axes: Vec<Axis>,
    /// Row-major, last axis fastest.
    pub values: Vec<Complex64>,
}

impl GridFn {
    pub fn new(axes: Vec<Axis>, values: Vec<Complex64>) -> Result<GridFn> {
        let expect: usize = axes.iter().map(|a| a.len).product();
        if expect != values.len() {
            return Err(QmlError::Dimension(format!(
                "grid has {} nodes but {} values",
                expect,
                values.len()
            )));
        }
        if axes.iter().any(|a| !(a.spacing > 0.0) || a.len == 0) {
            return Err(QmlError::InvalidArgument(
                "axis spacing must be positive and length nonzero".into(),
            ));
        }
        Ok(GridFn { axes, values })
    }

    pub fn from_fn(axes: Vec<Axis>, f: impl Fn(&[f64]) -> Complex64) -> Result<GridFn> {
        let total: usize = axes.iter().map(|a| a.len).product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        let mut pt = vec![0.0; axes.len()];
        for _ in 0..total {
            for (a, ax) in axes.iter().enumerate() {
                pt[a] = ax.point(idx[a]);
            }
            values.push(f(&pt));
            for a in (0..axes.len()).rev() {
                idx[a] += 1;
                if idx[a] < axes[a].len {
                    break;
                }
                idx[a] = 0;
            }
        }
        GridFn::new(axes, values)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// `(2πh)^{-d/2} ∫ e^{∓i x·ξ/h} f dx` on grids with `dx dξ = 2πh/N` per
/// axis. Exactly unitary in the discrete L² norms.
///
/// `bandwidth`, when given, is the largest `|ξ|` (forward) the function is
/// known to contain per axis; it must fit below the grid's Nyquist limit
/// `π h / dx`.
pub fn semiclassical_ft(f: &GridFn, h: f64, dir: Direction, bandwidth: Option<&[f64]>) -> Result<GridFn> {
    if !(h > 0.0) {
        return Err(QmlError::InvalidArgument(format!("h must be positive, got {}", h)));
    }
    if let Some(bw) = bandwidth {
        if bw.len() != f.axes.len() {
            return Err(QmlError::Dimension("bandwidth needs one entry per axis".into()));
        }
        for (a, (ax, &b)) in f.axes.iter().zip(bw).enumerate() {
            let limit = match dir {
                Direction::Forward => PI * h / ax.spacing,
                // conjugate spacing is dx = 2πh/(N dξ); limit π h/dx = N dξ/2
                Direction::Inverse => 0.5 * ax.len as f64 * ax.spacing,
            };
            if b > limit {
                return Err(QmlError::Nyquist {
                    axis: a,
                    msg: format!("content up to {:e} exceeds the grid limit {:e}", b, limit),
                });
            }
        }
    }
    let mut out = f.clone();
    let mut planner = FftPlanner::<f64>::new();
    let d = f.axes.len();
    for a in 0..d {
        let ax = f.axes[a].clone();
        let n = ax.len;
        let stride: usize = f.axes[a + 1..].iter().map(|x| x.len).product();
        let outer: usize = f.axes[..a].iter().map(|x| x.len).product();
        let conj_spacing = 2.0 * PI * h / (n as f64 * ax.spacing);
        let (x0, dx, xi0, dxi, sign) = match dir {
            Direction::Forward => {
                let xi0 = ax.conj_origin.unwrap_or(-((n / 2) as f64) * conj_spacing);
                (ax.origin, ax.spacing, xi0, conj_spacing, -1.0)
            }
            Direction::Inverse => {
                let x0 = ax.conj_origin.unwrap_or(-((n / 2) as f64) * conj_spacing);
                (x0, conj_spacing, ax.origin, ax.spacing, 1.0)
            }
        };
        // forward: input on x-grid, output on ξ-grid; inverse the other way
        let (in0, in_d, out0) = match dir {
            Direction::Forward => (x0, dx, xi0),
            Direction::Inverse => (xi0, dxi, x0),
        };
        let out_d = 2.0 * PI * h / (n as f64 * in_d);
        let pre: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, sign * j as f64 * in_d * out0 / h))
            .collect();
        let amp = in_d / (2.0 * PI * h).sqrt();
        let post: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(amp, sign * in0 * (out0 + k as f64 * out_d) / h))
            .collect();
        let fft = if sign < 0.0 {
            planner.plan_fft_forward(n)
        } else {
            planner.plan_fft_inverse(n)
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for j in 0..n {
                    buf[j] = out.values[base + j * stride] * pre[j];
                }
                fft.process(&mut buf);
                for k in 0..n {
                    out.values[base + k * stride] = buf[k] * post[k];
                }
            }
        }
        out.axes[a] = Axis {
            origin: out0,
            spacing: out_d,
            len: n,
            kind: match dir {
                Direction::Forward => AxisKind::Frequency,
                Direction::Inverse => AxisKind::Physical,
            },
            conj_origin: Some(in0),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_transform_and_norm() {
        let h = 0.05;
        let ax = Axis::midpoint(-3.0, 3.0, 256);
        let f = GridFn::from_fn(vec![ax], |x| Complex64::new((-x[0] * x[0] / (2.0 * h)).exp(), 0.0)).unwrap();
        let g = semiclassical_ft(&f, h, Direction::Forward, Some(&[1.5])).unwrap();
        assert!((g.norm_l2() / f.norm_l2() - 1.0).abs() < 1e-10);
        // the transform of e^{-x²/2h} is e^{-ξ²/2h} up to the linear phase of the shifted grid
        let ax = &g.axes[0];
        for k in 0..ax.len {
            let xi = ax.point(k);
            assert!((g.values[k].norm() - (-xi * xi / (2.0 * h)).exp()).abs() < 1e-10);
        }
        let back = semiclassical_ft(&g, h, Direction::Inverse, None).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-10);
        }
        assert_eq!(back.axes[0].origin, f.axes[0].origin);
    }

    #[test]
    fn impulse_has_flat_modulus() {
        let ax = Axis::physical(-1.0, 1.0 / 32.0, 64);
        let mut v = vec![Complex64::new(0.0, 0.0); 64];
        v[17] = Complex64::new(1.0, 0.0);
        let f = GridFn::new(vec![ax], v).unwrap();
        let g = semiclassical_ft(&f, 0.01, Direction::Forward, None).unwrap();
        let m0 = g.values[0].norm();
        assert!(g.values.iter().all(|v| (v.norm() - m0).abs() < 1e-12));
    }

    #[test]
    fn random_two_dimensional_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let axes = vec![Axis::physical(-0.4, 0.013, 48), Axis::physical(0.1, 0.021, 30)];
        let v: Vec<Complex64> = (0..48 * 30)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = GridFn::new(axes, v).unwrap();
        let g = semiclassical_ft(&f, 0.003, Direction::Forward, None).unwrap();
        assert!((g.norm_l2() / f.norm_l2() - 1.0).abs() < 1e-10);
        let back = semiclassical_ft(&g, 0.003, Direction::Inverse, None).unwrap();
        let err = back
            .values
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn nyquist_violation_names_axis() {
        let axes = vec![Axis::midpoint(-1.0, 1.0, 16), Axis::midpoint(-1.0, 1.0, 64)];
        let f = GridFn::from_fn(axes, |_| Complex64::new(1.0, 0.0)).unwrap();
        // limits π h/dx are about 1.26 and 5.03
        let r = semiclassical_ft(&f, 0.05, Direction::Forward, Some(&[2.0, 2.0]));
        assert!(matches!(r, Err(QmlError::Nyquist { axis: 0, .. })));
    }
}
