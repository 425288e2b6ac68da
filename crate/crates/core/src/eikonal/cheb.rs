//! Tensor-product Chebyshev interpolation in barycentric form.

use crate::error::{QmlError, Result};

/// Chebyshev points of the second kind on `[lo, hi]`, ascending.
pub fn cheb_nodes(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..m)
        .map(|k| {
            let c = -(std::f64::consts::PI * k as f64 / (m - 1) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * c
        })
        .collect()
}

fn bary_weights(m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == m - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

// Normalised barycentric coefficients for evaluating at `x`.
fn coeffs(nodes: &[f64], w: &[f64], x: f64, out: &mut [f64]) {
    if let Some(k) = nodes.iter().position(|&v| v == x) {
        out.iter_mut().for_each(|c| *c = 0.0);
        out[k] = 1.0;
        return;
    }
    let mut s = 0.0;
    for k in 0..nodes.len() {
        out[k] = w[k] / (x - nodes[k]);
        s += out[k];
    }
    out.iter_mut().for_each(|c| *c /= s);
}

#[derive(Clone, Debug)]
pub struct Cheb2 {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    wu: Vec<f64>,
    wv: Vec<f64>,
    /// Row-major values `f(u[i], v[j])`.
    pub values: Vec<f64>,
}

impl Cheb2 {
    pub fn new(u: Vec<f64>, v: Vec<f64>, values: Vec<f64>) -> Result<Cheb2> {
        if values.len() != u.len() * v.len() || u.len() < 2 || v.len() < 2 {
            return Err(QmlError::Dimension("Chebyshev table shape mismatch".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(QmlError::Domain("Chebyshev table has non-finite entries".into()));
        }
        Ok(Cheb2 {
            wu: bary_weights(u.len()),
            wv: bary_weights(v.len()),
            u,
            v,
            values,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut cu = vec![0.0; self.u.len()];
        let mut cv = vec![0.0; self.v.len()];
        coeffs(&self.u, &self.wu, x, &mut cu);
        coeffs(&self.v, &self.wv, y, &mut cv);
        let nv = self.v.len();
        let mut acc = 0.0;
        for (i, a) in cu.iter().enumerate() {
            let row = &self.values[i * nv..(i + 1) * nv];
            acc += a * row.iter().zip(&cv).map(|(f, b)| f * b).sum::<f64>();
        }
        acc
    }

    /// `f(x, y_k)` for every `y_k`, sharing the work along the row.
    pub fn eval_row(&self, x: f64, ys: &[f64]) -> Vec<f64> {
        let nv = self.v.len();
        let mut cu = vec![0.0; self.u.len()];
        coeffs(&self.u, &self.wu, x, &mut cu);
        let mut slice = vec![0.0; nv];
        for (i, a) in cu.iter().enumerate() {
            for (s, f) in slice.iter_mut().zip(&self.values[i * nv..(i + 1) * nv]) {
                *s += a * f;
            }
        }
        let mut cv = vec![0.0; nv];
        ys.iter()
            .map(|&y| {
                coeffs(&self.v, &self.wv, y, &mut cv);
                cv.iter().zip(&slice).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials() {
        let u = cheb_nodes(-1.6, 1.6, 9);
        let v = cheb_nodes(-1.6, 1.6, 9);
        let f = |t: f64, n: f64| t * n * n + t * t * n + t.powi(3) / 3.0;
        let vals: Vec<f64> = u.iter().flat_map(|&a| v.iter().map(move |&b| f(a, b))).collect();
        let c = Cheb2::new(u, v, vals).unwrap();
        for &(a, b) in &[(0.1, -0.3), (1.5, 1.2), (-1.6, 0.7), (0.0, 0.0)] {
            assert!((c.eval(a, b) - f(a, b)).abs() < 1e-13);
        }
    }

    #[test]
    fn smooth_function_spectral_accuracy() {
        let u = cheb_nodes(-1.0, 1.0, 30);
        let v = cheb_nodes(-1.0, 1.0, 30);
        let f = |a: f64, b: f64| (a + 0.5 * b).sin() * (b * b).exp();
        let vals: Vec<f64> = u.iter().flat_map(|&a| v.iter().map(move |&b| f(a, b))).collect();
        let c = Cheb2::new(u, v, vals).unwrap();
        assert!((c.eval(0.33, -0.71) - f(0.33, -0.71)).abs() < 1e-12);
    }
}
