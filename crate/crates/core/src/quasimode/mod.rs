//! Restriction exponents and the explicit saturating quasimode.
//!
//! Fourier-side variables are ordered `(τ, η′, ν)`, physical ones
//! `(t, y′, r)`; the hypersurface is `r = 0`.

pub mod cutoff;
pub mod pexp;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QmlError, Result};
use crate::osc::fit::{scaling_fit, ScalingFit};
use crate::osc::grid::{semiclassical_ft, Axis, Direction, GridFn};
use cutoff::chi;

type C64 = Complex64;

/// `δ(n, p)` and, where the curved estimate improves on it, `δ̃(n, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub n: usize,
    #[serde(with = "pexp")]
    pub p: f64,
    pub delta: f64,
    pub delta_tilde: Option<f64>,
}

pub fn critical_p(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 1.0)
}

pub fn exponents(n: usize, p: f64) -> Result<Exponents> {
    if n < 2 {
        return Err(QmlError::InvalidArgument(format!("n must be at least 2, got {}", n)));
    }
    if !(p >= 2.0) {
        return Err(QmlError::InvalidArgument(format!("p must be at least 2, got {}", p)));
    }
    let m = n as f64 - 1.0;
    let pc = critical_p(n);
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let delta = if p >= pc {
        m / 2.0 - m * inv
    } else {
        m / 4.0 - (n as f64 - 2.0) * inv / 2.0
    };
    let delta_tilde = (p <= pc).then(|| saturation_exponent(n, p));
    Ok(Exponents {
        n,
        p,
        delta,
        delta_tilde,
    })
}

/// Growth rate of the model quasimode's restricted `L^p` norm,
/// `(n−1)/3 − (2n−3)/(3p)`; it equals `δ̃` where that is defined.
pub fn saturation_exponent(n: usize, p: f64) -> f64 {
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    (n as f64 - 1.0) / 3.0 - (2.0 * n as f64 - 3.0) * inv / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasimodeSettings {
    pub epsilon: f64,
    pub points_per_period: f64,
    /// Target points per axis of the restriction region.
    pub region_points: usize,
    /// Bytes allowed for the Fourier-side grid and its transform.
    pub memory_budget: u64,
}

impl Default for QuasimodeSettings {
    fn default() -> Self {
        QuasimodeSettings {
            epsilon: 0.1,
            points_per_period: 6.0,
            region_points: 33,
            memory_budget: 1 << 31,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuasimodeBundle {
    pub n: usize,
    pub h: f64,
    pub epsilon: f64,
    /// `f` on the `(τ, η′, ν)` grid.
    pub f: GridFn,
    /// `R_H u` at the region nodes, axes `(t, y′)`.
    pub region: GridFn,
    pub f_l2: f64,
    pub u_l2: f64,
    pub residual: f64,
}

fn cell_axis(lo: f64, hi: f64, dmax: f64) -> Axis {
    Axis::midpoint(lo, hi, ((hi - lo) / dmax).ceil().max(1.0) as usize)
}

/// `ψ = ν³/3 + ν(|η′|² − τ)`, which solves `(τ + hD_ν − ν² − |η′|²) e^{iψ/h} = 0`.
fn model_phase(tau: f64, eta2: f64, nu: f64) -> f64 {
    nu * nu * nu / 3.0 + nu * (eta2 - tau)
}

fn model_phase_nu(tau: f64, eta2: f64, nu: f64) -> f64 {
    nu * nu + eta2 - tau
}

/// Fourier-side axes for the model quasimode at this `h`.
pub fn model_axes(n: usize, h: f64, ppp: f64) -> Vec<Axis> {
    let h13 = h.cbrt();
    let h23 = h13 * h13;
    let mut axes = vec![cell_axis(-2.0 * h23, 2.0 * h23, 2.0 * PI * h / (ppp * 2.0))];
    for _ in 0..n - 2 {
        axes.push(cell_axis(-2.0 * h13, 2.0 * h13, 2.0 * PI * h / (ppp * 8.0 * h13)));
    }
    let g_nu = 4.0 + 2.0 * h23 + (n - 2) as f64 * 4.0 * h23;
    axes.push(cell_axis(-2.0, 2.0, 2.0 * PI * h / (ppp * g_nu)));
    axes
}

pub fn build_model_quasimode(n: usize, h: f64, s: &QuasimodeSettings) -> Result<QuasimodeBundle> {
    if !(2..=3).contains(&n) {
        return Err(QmlError::Dimension(format!(
            "the model quasimode supports n = 2 or 3, got {}",
            n
        )));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(QmlError::InvalidArgument(format!("h must lie in (0, 1), got {}", h)));
    }
    if !(s.epsilon > 0.0) || s.region_points < 2 {
        return Err(QmlError::InvalidArgument(
            "epsilon must be positive and region_points at least 2".into(),
        ));
    }
    let axes = model_axes(n, h, s.points_per_period);
    let nodes: u64 = axes.iter().map(|a| a.len as u64).product();
    // f plus the transformed copy
    let needed = nodes * 32;
    if needed > s.memory_budget {
        return Err(QmlError::MemoryBudget {
            needed,
            budget: s.memory_budget,
        });
    }
    let h13 = h.cbrt();
    let h23 = h13 * h13;
    let amp = h.powf(-((n as f64 - 2.0) / 6.0 + 1.0 / 3.0));
    let f = GridFn::from_fn(axes, |z| {
        let tau = z[0];
        let nu = z[n - 1];
        let eta = &z[1..n - 1];
        let eta2: f64 = eta.iter().map(|e| e * e).sum();
        let c = amp * chi(nu) * chi(tau / h23) * if n > 2 { chi(eta2.sqrt() / h13) } else { 1.0 };
        if c == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::from_polar(c, model_phase(tau, eta2, nu) / h)
        }
    })?;
    let f_l2 = f.norm_l2();
    let residual = fourier_residual(&f, h)?;
    let u_l2 = physical_l2(&f, h)?;
    let region = region_values(&f, h, s.epsilon, s.region_points)?;
    Ok(QuasimodeBundle {
        n,
        h,
        epsilon: s.epsilon,
        f,
        region,
        f_l2,
        u_l2,
        residual,
    })
}

const D1_5: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

/// `‖(τ + hD_ν − ν² − |η′|²) f‖₂` for `f` on a `(τ, η′, ν)` grid.
///
/// `D_ν` acts on `f = A e^{iψ/h}` through the product rule, with the phase
/// derivative exact and the envelope `A` differenced to fourth order,
/// periodically in `ν` (the cutoff makes `A` vanish at both ends).
pub fn fourier_residual(f: &GridFn, h: f64) -> Result<f64> {
    let d = f.axes.len();
    if d < 2 {
        return Err(QmlError::Dimension("need at least the τ and ν axes".into()));
    }
    let nu_ax = &f.axes[d - 1];
    let nn = nu_ax.len;
    if nn < 5 {
        return Err(QmlError::Resolution("the ν axis needs at least 5 nodes".into()));
    }
    let dnu = nu_ax.spacing;
    let sum: f64 = f
        .values
        .par_chunks(nn)
        .enumerate()
        .map(|(row, vals)| {
            // decode (τ, η′) of this row
            let mut k = row;
            let mut z = vec![0.0; d - 1];
            for a in (0..d - 1).rev() {
                let len = f.axes[a].len;
                z[a] = f.axes[a].point(k % len);
                k /= len;
            }
            let tau = z[0];
            let eta2: f64 = z[1..].iter().map(|e| e * e).sum();
            let env: Vec<C64> = (0..nn)
                .map(|j| {
                    let nu = nu_ax.point(j);
                    vals[j] * C64::from_polar(1.0, -model_phase(tau, eta2, nu) / h)
                })
                .collect();
            let mut acc = 0.0;
            for j in 0..nn {
                let nu = nu_ax.point(j);
                let mut da = C64::new(0.0, 0.0);
                for (o, c) in D1_5.iter().enumerate() {
                    let jj = (j + nn + o - 2) % nn;
                    da += env[jj] * *c;
                }
                da /= dnu;
                let sym = tau + model_phase_nu(tau, eta2, nu) - nu * nu - eta2;
                let r = env[j] * sym - C64::new(0.0, h) * da;
                acc += r.norm_sqr();
            }
            acc
        })
        .sum();
    Ok((sum * f.cell_volume()).sqrt())
}

/// `‖χ(|x|) F_h^{-1} f‖₂`.
fn physical_l2(f: &GridFn, h: f64) -> Result<f64> {
    let u = semiclassical_ft(f, h, Direction::Inverse, None)?;
    let d = u.axes.len();
    let mut sum = 0.0;
    let mut idx = vec![0usize; d];
    for v in &u.values {
        let r2: f64 = (0..d).map(|a| u.axes[a].point(idx[a]).powi(2)).sum();
        sum += (chi(r2.sqrt()) * v.norm()).powi(2);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < u.axes[a].len {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok((sum * u.cell_volume()).sqrt())
}

/// `R_H u` on `[0, εh^{1/3}]_t × [−εh^{2/3}, εh^{2/3}]^{n−2}_{y′}` by direct
/// quadrature of the inverse transform at `r = 0`. The factor `χ(|x|)` is 1
/// there.
fn region_values(f: &GridFn, h: f64, eps: f64, m: usize) -> Result<GridFn> {
    let d = f.axes.len();
    let nu_len = f.axes[d - 1].len;
    let dnu = f.axes[d - 1].spacing;
    // marginal over ν on the (τ, η′) grid
    let marginal: Vec<C64> = f
        .values
        .par_chunks(nu_len)
        .map(|c| c.iter().sum::<C64>() * dnu)
        .collect();
    let h13 = h.cbrt();
    let mut axes = vec![Axis::physical(0.0, eps * h13 / (m - 1) as f64, m)];
    for _ in 1..d - 1 {
        let w = eps * h13 * h13;
        axes.push(Axis::physical(-w, 2.0 * w / (m - 1) as f64, m));
    }
    let fa = &f.axes[..d - 1];
    let vol: f64 = fa.iter().map(|a| a.spacing).product();
    let norm = (2.0 * PI * h).powf(-(d as f64) / 2.0) * vol;
    let targets: Vec<Vec<f64>> = {
        let total: usize = axes.iter().map(|a| a.len).product();
        (0..total)
            .map(|mut k| {
                let mut z = vec![0.0; axes.len()];
                for a in (0..axes.len()).rev() {
                    z[a] = axes[a].point(k % axes[a].len);
                    k /= axes[a].len;
                }
                z
            })
            .collect()
    };
    let values: Vec<C64> = targets
        .par_iter()
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            let mut idx = vec![0usize; fa.len()];
            for v in &marginal {
                let ph: f64 = (0..fa.len()).map(|a| x[a] * fa[a].point(idx[a])).sum();
                acc += v * C64::from_polar(1.0, ph / h);
                for a in (0..fa.len()).rev() {
                    idx[a] += 1;
                    if idx[a] < fa[a].len {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            acc * norm
        })
        .collect();
    GridFn::new(axes, values)
}

/// Composite-trapezoid `L^p` norm of a grid function over its full grid;
/// `p = ∞` is the max modulus.
pub fn lp_norm(u: &GridFn, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(QmlError::InvalidArgument(format!("p must be at least 1, got {}", p)));
    }
    if p.is_infinite() {
        return Ok(u.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let d = u.axes.len();
    let mut idx = vec![0usize; d];
    let mut sum = 0.0;
    for v in &u.values {
        let mut w = 1.0;
        for a in 0..d {
            let ax = &u.axes[a];
            let edge = ax.len > 1 && (idx[a] == 0 || idx[a] == ax.len - 1);
            w *= if ax.len == 1 {
                1.0
            } else {
                ax.spacing * if edge { 0.5 } else { 1.0 }
            };
        }
        sum += w * v.norm().powf(p);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < u.axes[a].len {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(sum.powf(1.0 / p))
}

/// `‖u|_{x_axis = 0}‖_{L^p(region)}` where `region` gives a closed interval
/// for each remaining axis; the slice plane must be a grid plane.
pub fn restrict_and_norm(u: &GridFn, axis: usize, region: &[(f64, f64)], p: f64) -> Result<f64> {
    let d = u.axes.len();
    if axis >= d || region.len() != d - 1 {
        return Err(QmlError::Dimension(format!(
            "slice axis {} with {} region intervals on a {}-dimensional grid",
            axis,
            region.len(),
            d
        )));
    }
    let ax = &u.axes[axis];
    let k = (0..ax.len)
        .find(|&k| ax.point(k).abs() <= 1e-9 * ax.spacing)
        .ok_or_else(|| QmlError::InvalidArgument(format!("no grid plane at 0 on axis {}", axis)))?;
    let rest: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
    let mut ranges = Vec::new();
    for (r, &a) in region.iter().zip(&rest) {
        let axr = &u.axes[a];
        let tol = 1e-9 * axr.spacing;
        let inside: Vec<usize> = (0..axr.len)
            .filter(|&i| axr.point(i) >= r.0 - tol && axr.point(i) <= r.1 + tol)
            .collect();
        if inside.is_empty() {
            return Err(QmlError::InvalidArgument(format!("region is empty on axis {}", a)));
        }
        ranges.push((inside[0], inside.len()));
    }
    let axes: Vec<Axis> = rest
        .iter()
        .zip(&ranges)
        .map(|(&a, &(i0, len))| Axis::physical(u.axes[a].point(i0), u.axes[a].spacing, len))
        .collect();
    let strides: Vec<usize> = (0..d)
        .map(|a| u.axes[a + 1..].iter().map(|x| x.len).product())
        .collect();
    let sub = GridFn::from_fn(axes, |_| C64::new(0.0, 0.0))?;
    let total = sub.values.len();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; rest.len()];
    for _ in 0..total {
        let mut off = k * strides[axis];
        for (j, &a) in rest.iter().enumerate() {
            off += (ranges[j].0 + idx[j]) * strides[a];
        }
        values.push(u.values[off]);
        for j in (0..rest.len()).rev() {
            idx[j] += 1;
            if idx[j] < ranges[j].1 {
                break;
            }
            idx[j] = 0;
        }
    }
    lp_norm(&GridFn::new(sub.axes, values)?, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeRow {
    pub h: f64,
    #[serde(with = "pexp")]
    pub p: f64,
    pub restricted_norm: f64,
    pub u_l2: f64,
    pub f_l2: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormFit {
    #[serde(with = "pexp")]
    pub p: f64,
    pub fit: ScalingFit,
}

/// `‖R_H u‖₂ ≤ C h^{-1/2} ‖u‖₂` across the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeilingCheck {
    /// Smallest `C` that covers every sample.
    pub constant: f64,
    /// Fitted slope of `log(‖R_H u‖₂/‖u‖₂)` against `log h`.
    pub slope: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeExperiment {
    pub n: usize,
    pub epsilon: f64,
    pub rows: Vec<QuasimodeRow>,
    pub fits: Vec<NormFit>,
    pub residual_fit: ScalingFit,
    pub residual_pass: bool,
    pub f_l2_range: (f64, f64),
    pub f_l2_pass: bool,
    pub u_l2_ratio: f64,
    pub u_l2_pass: bool,
    pub ceiling: CeilingCheck,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub const F_L2_BOUNDS: (f64, f64) = (0.1, 10.0);
pub const RESIDUAL_MIN_SLOPE: f64 = 0.9;

/// Build the quasimode for every `h`, measure the restricted norms and fit
/// each against `h^{-(saturation exponent)}` within `margin`.
pub fn h_scaling_experiment(
    n: usize,
    ps: &[f64],
    hs: &[f64],
    margin: f64,
    s: &QuasimodeSettings,
) -> Result<QuasimodeExperiment> {
    if hs.len() < crate::osc::fit::MIN_FIT_SAMPLES {
        return Err(QmlError::InsufficientSamples(format!(
            "the h ladder needs at least {} values, got {}",
            crate::osc::fit::MIN_FIT_SAMPLES,
            hs.len()
        )));
    }
    if let Some(&p) = ps.iter().find(|&&p| !(p >= 2.0)) {
        return Err(QmlError::InvalidArgument(format!("p must be at least 2, got {}", p)));
    }
    let mut with_two: Vec<f64> = ps.to_vec();
    if !with_two.contains(&2.0) {
        with_two.push(2.0);
    }
    let bundles: Vec<(f64, f64, f64, f64, Vec<f64>)> = hs
        .par_iter()
        .map(|&h| {
            let b = build_model_quasimode(n, h, s)?;
            let norms = with_two
                .iter()
                .map(|&p| lp_norm(&b.region, p))
                .collect::<Result<Vec<_>>>()?;
            Ok((h, b.u_l2, b.f_l2, b.residual, norms))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (h, u, f, r, norms) in &bundles {
        for &p in ps {
            let idx = with_two.iter().position(|&q| q == p).unwrap();
            rows.push(QuasimodeRow {
                h: *h,
                p,
                restricted_norm: norms[idx],
                u_l2: *u,
                f_l2: *f,
                residual: *r,
            });
        }
    }
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &p in ps {
        let idx = with_two.iter().position(|&q| q == p).unwrap();
        let samples: Vec<(f64, f64)> = bundles.iter().map(|b| (b.0, b.4[idx])).collect();
        let fit = scaling_fit(&samples, Some(-saturation_exponent(n, p)), Some(margin))?;
        if fit.pass != Some(true) {
            failures.push(format!(
                "p = {}: slope {:.4} misses target {:.4} ± {}",
                pexp::label(p),
                fit.slope,
                -saturation_exponent(n, p),
                margin
            ));
        }
        fits.push(NormFit { p, fit });
    }
    let residual_fit = scaling_fit(&bundles.iter().map(|b| (b.0, b.3)).collect::<Vec<_>>(), None, None)?;
    let residual_pass = residual_fit.slope >= RESIDUAL_MIN_SLOPE;
    if !residual_pass {
        failures.push(format!(
            "residual slope {:.4} below {}",
            residual_fit.slope, RESIDUAL_MIN_SLOPE
        ));
    }
    let flo = bundles.iter().map(|b| b.2).fold(f64::INFINITY, f64::min);
    let fhi = bundles.iter().map(|b| b.2).fold(0.0, f64::max);
    let f_l2_pass = flo >= F_L2_BOUNDS.0 && fhi <= F_L2_BOUNDS.1;
    if !f_l2_pass {
        failures.push(format!("‖f‖₂ ranges over [{:.4}, {:.4}]", flo, fhi));
    }
    let ulo = bundles.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let uhi = bundles.iter().map(|b| b.1).fold(0.0, f64::max);
    let u_l2_ratio = uhi / ulo;
    let u_l2_pass = u_l2_ratio < 2.0;
    if !u_l2_pass {
        failures.push(format!("‖u‖₂ varies by a factor {:.3}", u_l2_ratio));
    }
    let i2 = with_two.iter().position(|&q| q == 2.0).unwrap();
    let ratios: Vec<(f64, f64)> = bundles.iter().map(|b| (b.0, b.4[i2] / b.1)).collect();
    let constant = ratios.iter().map(|&(h, q)| q * h.sqrt()).fold(0.0, f64::max);
    let slope = scaling_fit(&ratios, None, None)?.slope;
    let ceiling = CeilingCheck {
        constant,
        slope,
        pass: slope >= -0.5,
    };
    if !ceiling.pass {
        failures.push(format!("‖R_H u‖₂/‖u‖₂ grows like h^{:.4}, faster than h^-1/2", slope));
    }
    Ok(QuasimodeExperiment {
        n,
        epsilon: s.epsilon,
        rows,
        fits,
        residual_fit,
        residual_pass,
        f_l2_range: (flo, fhi),
        f_l2_pass,
        u_l2_ratio,
        u_l2_pass,
        ceiling,
        passed: failures.is_empty(),
        failures,
    })
}

pub fn write_quasimode_csv<W: Write>(rows: &[QuasimodeRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["h", "p", "restricted_norm", "u_l2", "f_l2", "residual"])?;
    for r in rows {
        out.write_record([
            format!("{:e}", r.h),
            pexp::label(r.p),
            format!("{:.12e}", r.restricted_norm),
            format!("{:.12e}", r.u_l2),
            format!("{:.12e}", r.f_l2),
            format!("{:.12e}", r.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}
