//! Discretised oscillatory integral operators `T_λ f(x) = ∫ e^{iλψ(x,y)} β(x,y) f(y) dy`.
//!
//! Two realisations share the [`LinearOperator`] trait: a dense matrix, and
//! a structured form for phases `ψ = A(x) + B(y) + G(x ∓ y)` whose
//! matrix-vector product is a diagonal–Toeplitz–diagonal sandwich evaluated
//! with FFTs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::Axis;
use crate::eikonal::cheb::Cheb2;
use crate::error::{QmlError, Result};
use crate::quasimode::cutoff::chi;
use crate::symbol::{eval_jet, parse_symbol, Arity, PhasePoint, SymbolFn};

type C64 = Complex64;

pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, w: &[C64]) -> Vec<C64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<C64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<DenseOperator> {
        if data.len() != rows * cols {
            return Err(QmlError::Dimension(format!(
                "{}×{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseOperator { rows, cols, data })
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.data
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
    fn apply_adjoint(&self, w: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (row, wi) in self.data.chunks(self.cols).zip(w) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * wi;
            }
        }
        out
    }
}

/// Phase `ψ(x, y)` of an oscillatory operator.
#[derive(Clone, Debug)]
pub enum OscPhase {
    /// Expression in `x1 = x`, `x2 = y`.
    Expr(SymbolFn),
    /// Tabulated phase (rows = output variable, columns = input variable).
    Table(Arc<Cheb2>),
}

impl OscPhase {
    pub fn parse(text: &str) -> Result<OscPhase> {
        let f = parse_symbol(text, 2)?;
        if f.arity != Arity::BaseSpace {
            return Err(QmlError::InvalidArgument(
                "an operator phase may only use x1 (output) and x2 (input)".into(),
            ));
        }
        Ok(OscPhase::Expr(f))
    }

    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            OscPhase::Expr(f) => f.expr.eval(&[x, y, 0.0, 0.0], 2),
            OscPhase::Table(c) => Ok(c.eval(x, y)),
        }
    }

    /// `ψ(x, y_k)` for every `y_k`.
    pub fn row(&self, x: f64, ys: &[f64]) -> Result<Vec<f64>> {
        match self {
            OscPhase::Expr(_) => ys.iter().map(|&y| self.value(x, y)).collect(),
            OscPhase::Table(c) => Ok(c.eval_row(x, ys)),
        }
    }

    fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        match self {
            OscPhase::Expr(f) => {
                let j = eval_jet(f, &PhasePoint::new(vec![x, y], vec![0.0, 0.0]), 1)?;
                Ok((j.d1(0), j.d1(1)))
            }
            OscPhase::Table(c) => {
                let e = 1e-6;
                let gx = (c.eval(x + e, y) - c.eval(x - e, y)) / (2.0 * e);
                let gy = (c.eval(x, y + e) - c.eval(x, y - e)) / (2.0 * e);
                Ok((gx, gy))
            }
        }
    }

    /// `(max |∂_x ψ|, max |∂_y ψ|)` over a 129×129 sample of the box, corners included.
    pub fn max_gradient(&self, xr: (f64, f64), yr: (f64, f64)) -> Result<(f64, f64)> {
        let m = 129;
        let mut g = (0.0f64, 0.0f64);
        for i in 0..m {
            let x = xr.0 + (xr.1 - xr.0) * i as f64 / (m - 1) as f64;
            for j in 0..m {
                let y = yr.0 + (yr.1 - yr.0) * j as f64 / (m - 1) as f64;
                let (gx, gy) = self.gradient(x, y)?;
                g = (g.0.max(gx.abs()), g.1.max(gy.abs()));
            }
        }
        Ok(g)
    }
}

/// Product bump `χ(|x|/wx) χ(|y|/wy)`, supported in `[-2wx, 2wx] × [-2wy, 2wy]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub wx: f64,
    pub wy: f64,
}

impl Bump {
    pub fn square(w: f64) -> Bump {
        Bump { wx: w, wy: w }
    }
    pub fn x_factor(&self, x: f64) -> f64 {
        chi(x / self.wx)
    }
    pub fn y_factor(&self, y: f64) -> f64 {
        chi(y / self.wy)
    }
    pub fn x_support(&self) -> (f64, f64) {
        (-2.0 * self.wx, 2.0 * self.wx)
    }
    pub fn y_support(&self) -> (f64, f64) {
        (-2.0 * self.wy, 2.0 * self.wy)
    }
}

pub const DEFAULT_POINTS_PER_PERIOD: f64 = 6.0;

/// Cell-centred grids with one common spacing covering the amplitude
/// support, fine enough for at least `ppp` points in every local period of
/// `λψ` along each axis. The shared spacing keeps `x ∓ y` on index
/// diagonals, which the structured operator relies on.
pub fn resolved_axes(phase: &OscPhase, amp: &Bump, lambda: f64, ppp: f64, min_len: usize) -> Result<(Axis, Axis)> {
    let (xr, yr) = (amp.x_support(), amp.y_support());
    let (gx, gy) = phase.max_gradient(xr, yr)?;
    let g = gx.max(gy).max(1e-300);
    let range = (xr.1 - xr.0).max(yr.1 - yr.0);
    let mut d = 2.0 * PI / (ppp * lambda * g);
    d = d.min(range / min_len as f64);
    let axis = |r: (f64, f64)| {
        let len = ((r.1 - r.0) / d * (1.0 - 1e-12)).ceil() as usize;
        let mid = 0.5 * (r.0 + r.1);
        Axis::physical(mid - 0.5 * d * (len as f64 - 1.0), d, len)
    };
    Ok((axis(xr), axis(yr)))
}

fn check_resolution(phase: &OscPhase, lambda: f64, xa: &Axis, ya: &Axis, ppp: f64) -> Result<()> {
    let xr = (xa.point(0), xa.point(xa.len - 1));
    let yr = (ya.point(0), ya.point(ya.len - 1));
    let (gx, gy) = phase.max_gradient(xr, yr)?;
    let limit = 2.0 * PI / ppp * (1.0 + 1e-9);
    for (name, g, d) in [("x", gx, xa.spacing), ("y", gy, ya.spacing)] {
        let worst = lambda * g * d;
        if worst > limit {
            return Err(QmlError::Resolution(format!(
                "along {}: λ|∂ψ|·d = {:.4} exceeds 2π/{} (fewer than {} points per period)",
                name, worst, ppp, ppp
            )));
        }
    }
    Ok(())
}

/// Dense matrix `M_ij = e^{iλψ(x_i,y_j)} β(x_i,y_j) dy`.
pub fn build_osc_operator(
    phase: &OscPhase,
    amp: &Bump,
    lambda: f64,
    xa: &Axis,
    ya: &Axis,
    ppp: f64,
) -> Result<DenseOperator> {
    check_resolution(phase, lambda, xa, ya, ppp)?;
    let xs = xa.points();
    let ys = ya.points();
    let by: Vec<f64> = ys.iter().map(|&y| amp.y_factor(y) * ya.spacing).collect();
    let rows: Vec<Result<Vec<C64>>> = xs
        .par_iter()
        .map(|&x| {
            let bx = amp.x_factor(x);
            let psi = phase.row(x, &ys)?;
            Ok(psi
                .iter()
                .zip(&by)
                .map(|(&p, &b)| {
                    let w = bx * b;
                    if w == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::from_polar(w, lambda * p)
                    }
                })
                .collect())
        })
        .collect();
    let mut data = Vec::with_capacity(xs.len() * ys.len());
    for r in rows {
        data.extend(r?);
    }
    DenseOperator::new(xs.len(), ys.len(), data)
}

/// `Φ(i, j) = A_i + B_j + G_{i−j}` on index space, if it holds.
#[derive(Clone, Debug)]
pub struct ToeplitzSplit {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `g[k + ny − 1] = G_k` for `k ∈ [−(ny−1), nx−1]`.
    pub g: Vec<f64>,
    pub max_error: f64,
}

/// Split a phase sampled on index space; `None` when the sampled check
/// against `phi` exceeds `tol`.
pub fn toeplitz_split(
    phi: &(dyn Fn(usize, usize) -> Result<f64> + Sync),
    nx: usize,
    ny: usize,
    tol: f64,
    seed: u64,
) -> Result<Option<ToeplitzSplit>> {
    if nx < 2 || ny < 2 {
        return Ok(None);
    }
    let off = ny - 1;
    let mut g = vec![0.0; nx + ny - 1];
    // G_k for k ≥ 1 with the gauge B_0 − B_1 absorbed
    // compensated running sum; long ladders otherwise drift past `tol`
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    for k in 1..nx {
        let term = phi(k, 0)? - phi(k, 1)?;
        let t = acc + term;
        comp += if acc.abs() >= term.abs() {
            (acc - t) + term
        } else {
            (term - t) + acc
        };
        acc = t;
        g[off + k] = acc + comp;
    }
    let c = phi(1, 1)? - phi(0, 0)?;
    for j in 1..ny {
        g[off - j] = g[off + 1 - j] - phi(1, j)? + phi(0, j)? + c;
    }
    let p00 = phi(0, 0)?;
    let a: Vec<f64> = (0..nx).map(|i| Ok(phi(i, 0)? - g[off + i])).collect::<Result<_>>()?;
    let b: Vec<f64> = (0..ny)
        .map(|j| Ok(phi(0, j)? - p00 - g[off - j]))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = vec![(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1), (nx / 2, ny / 2)];
    pairs.extend((0..512).map(|_| (rng.gen_range(0..nx), rng.gen_range(0..ny))));
    let mut worst = 0.0f64;
    for (i, j) in pairs {
        let e = (a[i] + b[j] + g[off + i - j] - phi(i, j)?).abs();
        worst = worst.max(e);
        if !(e <= tol) {
            return Ok(None);
        }
    }
    Ok(Some(ToeplitzSplit {
        a,
        b,
        g,
        max_error: worst,
    }))
}

pub struct StructuredOperator {
    nx: usize,
    ny: usize,
    left: Vec<C64>,
    right: Vec<C64>,
    kernel: Vec<C64>,
    kernel_adj: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    reversed: bool,
    pub split_error: f64,
}

impl std::fmt::Debug for StructuredOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StructuredOperator")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("reversed", &self.reversed)
            .finish()
    }
}

impl StructuredOperator {
    /// Same matrix as [`build_osc_operator`], in structured form, or `None`
    /// if the phase does not split (neither in `x − y` nor in `x + y`).
    pub fn try_build(
        phase: &OscPhase,
        amp: &Bump,
        lambda: f64,
        xa: &Axis,
        ya: &Axis,
        ppp: f64,
        seed: u64,
    ) -> Result<Option<StructuredOperator>> {
        check_resolution(phase, lambda, xa, ya, ppp)?;
        let (nx, ny) = (xa.len, ya.len);
        // entry errors λ·|δψ| stay below 1e-6
        let tol = 1e-6 / lambda.max(1.0);
        for reversed in [false, true] {
            let yi = |j: usize| if reversed { ya.point(ny - 1 - j) } else { ya.point(j) };
            let phi = |i: usize, j: usize| phase.value(xa.point(i), yi(j));
            if let Some(split) = toeplitz_split(&phi, nx, ny, tol, seed)? {
                let left = (0..nx)
                    .map(|i| C64::from_polar(amp.x_factor(xa.point(i)), lambda * split.a[i]))
                    .collect();
                let right = (0..ny)
                    .map(|j| C64::from_polar(amp.y_factor(yi(j)) * ya.spacing, lambda * split.b[j]))
                    .collect();
                let len = (nx + ny - 1).next_power_of_two();
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(len);
                let inv = planner.plan_fft_inverse(len);
                let off = ny - 1;
                let mut kernel = vec![C64::new(0.0, 0.0); len];
                let mut kernel_adj = vec![C64::new(0.0, 0.0); len];
                for k in -(off as isize)..nx as isize {
                    let g = C64::from_polar(1.0, lambda * split.g[(k + off as isize) as usize]);
                    kernel[k.rem_euclid(len as isize) as usize] = g;
                    kernel_adj[(-k).rem_euclid(len as isize) as usize] = g.conj();
                }
                fwd.process(&mut kernel);
                fwd.process(&mut kernel_adj);
                let scale = 1.0 / len as f64;
                kernel.iter_mut().for_each(|v| *v *= scale);
                kernel_adj.iter_mut().for_each(|v| *v *= scale);
                return Ok(Some(StructuredOperator {
                    nx,
                    ny,
                    left,
                    right,
                    kernel,
                    kernel_adj,
                    fwd,
                    inv,
                    reversed,
                    split_error: split.max_error,
                }));
            }
        }
        Ok(None)
    }

    fn convolve(&self, kernel: &[C64], v: &[C64], out_len: usize) -> Vec<C64> {
        let len = kernel.len();
        let mut buf = vec![C64::new(0.0, 0.0); len];
        buf[..v.len()].copy_from_slice(v);
        self.fwd.process(&mut buf);
        buf.iter_mut().zip(kernel).for_each(|(a, k)| *a *= k);
        self.inv.process(&mut buf);
        buf.truncate(out_len);
        buf
    }

    pub fn is_hankel(&self) -> bool {
        self.reversed
    }
}

impl LinearOperator for StructuredOperator {
    fn rows(&self) -> usize {
        self.nx
    }
    fn cols(&self) -> usize {
        self.ny
    }
    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let w: Vec<C64> = if self.reversed {
            v.iter().rev().zip(&self.right).map(|(a, b)| a * b).collect()
        } else {
            v.iter().zip(&self.right).map(|(a, b)| a * b).collect()
        };
        let mut out = self.convolve(&self.kernel, &w, self.nx);
        out.iter_mut().zip(&self.left).for_each(|(o, l)| *o *= l);
        out
    }
    fn apply_adjoint(&self, w: &[C64]) -> Vec<C64> {
        let u: Vec<C64> = w.iter().zip(&self.left).map(|(a, l)| a * l.conj()).collect();
        let mut out = self.convolve(&self.kernel_adj, &u, self.ny);
        out.iter_mut().zip(&self.right).for_each(|(o, r)| *o *= r.conj());
        if self.reversed {
            out.reverse();
        }
        out
    }
}

/// Settings for the largest-singular-value solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerOptions {
    pub tol: f64,
    /// Cap on applications of `M* M`.
    pub max_iter: usize,
    /// Krylov vectors per restart cycle; 1 gives plain power iteration.
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-9,
            max_iter: 50_000,
            krylov_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub sigma: f64,
    /// Applications of `M* M` used.
    pub iterations: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of `op`: explicitly restarted Lanczos on `M* M`
/// with full reorthogonalisation, restarting from the top Ritz vector.
/// Stops when the top Ritz value moves by at most `tol` relative between
/// cycles, or when the Lanczos residual bound is below `tol`.
pub fn operator_norm(op: &dyn LinearOperator, opts: &PowerOptions) -> Result<NormEstimate> {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return Ok(NormEstimate {
            sigma: 0.0,
            iterations: 0,
        });
    }
    if opts.krylov_dim == 0 {
        return Err(QmlError::InvalidArgument("krylov_dim must be at least 1".into()));
    }
    let m = opts.krylov_dim.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|c| *c /= n0);
    let mut applies = 0;
    let mut prev = f64::NAN;
    loop {
        let mut basis: Vec<Vec<C64>> = vec![v];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut last_beta = 0.0;
        for j in 0..m {
            let mut w = op.apply_adjoint(&op.apply(&basis[j]));
            applies += 1;
            if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(QmlError::Domain("non-finite operator entries".into()));
            }
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let b = norm(&w);
            let scale = alpha.iter().map(|a| a.abs()).fold(0.0, f64::max);
            if j + 1 == m || b <= 1e-14 * scale {
                last_beta = if b <= 1e-14 * scale { 0.0 } else { b };
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|c| c / b).collect());
        }
        let k = alpha.len();
        let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let top = eig.eigenvalues.iamax();
        let theta = eig.eigenvalues[top];
        if theta <= 0.0 {
            return Ok(NormEstimate {
                sigma: 0.0,
                iterations: applies,
            });
        }
        let s = eig.eigenvectors.column(top);
        let bound = last_beta * s[k - 1].abs();
        if bound <= opts.tol * theta || (theta - prev).abs() <= opts.tol * theta {
            return Ok(NormEstimate {
                sigma: theta.sqrt(),
                iterations: applies,
            });
        }
        if applies >= opts.max_iter {
            return Err(QmlError::Convergence(format!(
                "norm estimate did not settle in {} operator applications",
                opts.max_iter
            )));
        }
        prev = theta;
        let mut ritz = vec![C64::new(0.0, 0.0); n];
        for (q, &c) in basis.iter().zip(s.iter()) {
            ritz.iter_mut().zip(q).for_each(|(a, b)| *a += b * c);
        }
        let r = norm(&ritz);
        v = ritz.into_iter().map(|c| c / r).collect();
    }
}
