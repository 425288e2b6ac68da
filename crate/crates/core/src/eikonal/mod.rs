//! Method-of-characteristics solver for `∂_t φ = a(t, x̄, ∂_x̄ φ)` with
//! `φ = x̄·ξ̄` on the initial slice, and the fold analysis built on it.

pub mod cheb;
pub mod fold;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fold::{
    classify_fold_map, classify_projections, fold_report, phase_fold_quantities_closed, phase_fold_quantities_numeric,
    FoldClass, FoldOptions, FoldQuantities, FoldReport,
};

use crate::error::{QmlError, Result};
use crate::geometry::{reduced_jet, tau_derivative};
use crate::ode::{integrate, OdeOptions};
use crate::symbol::{eval_jet, Jet, PhasePoint, SymbolFn, Var, VarKind};

pub const CAUSTIC_DET: f64 = 1e-4;

/// The reduced symbol `a(x, ξ̄)`, either solved from `p = 0` or given
/// directly as an expression in `x1..xn, xi2..xin`.
#[derive(Clone, Debug)]
pub enum ReducedSymbol {
    Implicit { p: SymbolFn, tau_seed: f64 },
    Explicit(SymbolFn),
}

impl ReducedSymbol {
    pub fn explicit(a: SymbolFn) -> Result<ReducedSymbol> {
        let mut uses_tau = false;
        a.expr
            .visit_vars(&mut |v: Var| uses_tau |= v.kind == VarKind::Xi && v.index == 0);
        if uses_tau {
            return Err(QmlError::InvalidArgument(
                "a reduced symbol may not depend on xi1".into(),
            ));
        }
        Ok(ReducedSymbol::Explicit(a))
    }

    pub fn n(&self) -> usize {
        match self {
            ReducedSymbol::Implicit { p, .. } => p.n,
            ReducedSymbol::Explicit(a) => a.n,
        }
    }

    /// Jet over `(x1..xn, ξ2..ξn)`, order at most 2.
    pub fn jet(&self, x: &[f64], xibar: &[f64], order: usize) -> Result<Jet> {
        match self {
            ReducedSymbol::Implicit { p, tau_seed } => reduced_jet(p, x, xibar, *tau_seed, order),
            ReducedSymbol::Explicit(a) => {
                let n = a.n;
                let mut xi = vec![0.0];
                xi.extend_from_slice(xibar);
                let full = eval_jet(a, &PhasePoint::new(x.to_vec(), xi), order)?;
                let dim = 2 * n - 1;
                let slot = |i: usize| if i < n { i } else { i + 1 };
                let mut out = Jet::zeros(dim, order);
                out.value = full.value;
                for i in 0..dim.min(out.gradient.len()) {
                    out.gradient[i] = full.d1(slot(i));
                }
                if order >= 2 {
                    for i in 0..dim {
                        for j in i..dim {
                            out.set_d2(i, j, full.d2(slot(i), slot(j)));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `e = ∂_τ p` at the characteristic point; 1 for an explicit `a`
    /// (where `p = τ − a` is implied).
    pub fn e_factor(&self, x: &[f64], xibar: &[f64]) -> Result<f64> {
        match self {
            ReducedSymbol::Implicit { p, tau_seed } => tau_derivative(p, x, xibar, *tau_seed),
            ReducedSymbol::Explicit(_) => Ok(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    /// Time levels; the initial slice `t0` need not be among them.
    pub t: Vec<f64>,
    /// One axis per component of `x̄ = (x2..xn)`.
    pub xbar: Vec<Vec<f64>>,
}

impl PhaseGrid {
    pub fn node_count(&self) -> usize {
        self.xbar.iter().map(|a| a.len()).product()
    }

    pub fn node(&self, mut k: usize) -> Vec<f64> {
        // last axis fastest
        let mut out = vec![0.0; self.xbar.len()];
        for a in (0..self.xbar.len()).rev() {
            let len = self.xbar[a].len();
            out[a] = self.xbar[a][k % len];
            k /= len;
        }
        out
    }

    fn strides(&self) -> Vec<usize> {
        let m = self.xbar.len();
        let mut s = vec![1; m];
        for a in (0..m.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.xbar[a + 1].len();
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseTable {
    pub n: usize,
    pub t0: f64,
    /// Parameter values `ξ̄` (one table slice per entry).
    pub params: Vec<Vec<f64>>,
    pub grid: PhaseGrid,
    /// `values[param][t][node]`; NaN where the node could not be reached.
    pub values: Vec<Vec<Vec<f64>>>,
    pub caustic: Vec<Vec<Vec<bool>>>,
    /// `∂_x̄ φ` at each node, i.e. the characteristic momentum.
    pub momentum: Vec<Vec<Vec<Vec<f64>>>>,
    pub min_jacobian: f64,
    pub flagged: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub newton_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            newton_iters: 30,
        }
    }
}

struct CharState {
    x: Vec<f64>,
    xi: Vec<f64>,
    phi: f64,
    jx: DMatrix<f64>,
}

fn char_rhs(a: &ReducedSymbol, t: f64, y: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = m + 1;
    let xb = &y[..m];
    let xib = &y[m..2 * m];
    let mut x = vec![t];
    x.extend_from_slice(xb);
    let j = a.jet(&x, xib, 2)?;
    // reduced jet indices: t = 0, x̄ = 1..n, ξ̄ = n..2n-1
    let ix = |k: usize| 1 + k;
    let ip = |k: usize| n + k;
    let mut dy = vec![0.0; 2 * m + 1 + 2 * m * m];
    let mut phidot = j.value;
    for k in 0..m {
        dy[k] = -j.d1(ip(k));
        dy[m + k] = j.d1(ix(k));
        phidot -= xib[k] * j.d1(ip(k));
    }
    dy[2 * m] = phidot;
    let off = 2 * m + 1;
    let jx = &y[off..off + m * m];
    let jxi = &y[off + m * m..off + 2 * m * m];
    for r in 0..m {
        for c in 0..m {
            let mut vx = 0.0;
            let mut vxi = 0.0;
            for k in 0..m {
                vx -= j.d2(ip(r), ix(k)) * jx[k * m + c] + j.d2(ip(r), ip(k)) * jxi[k * m + c];
                vxi += j.d2(ix(r), ix(k)) * jx[k * m + c] + j.d2(ix(r), ip(k)) * jxi[k * m + c];
            }
            dy[off + r * m + c] = vx;
            dy[off + m * m + r * m + c] = vxi;
        }
    }
    Ok(dy)
}

fn shoot(a: &ReducedSymbol, t0: f64, t: f64, x0: &[f64], xib: &[f64], tol: f64) -> Result<CharState> {
    let m = x0.len();
    let mut y = Vec::with_capacity(2 * m + 1 + 2 * m * m);
    y.extend_from_slice(x0);
    y.extend_from_slice(xib);
    y.push(x0.iter().zip(xib).map(|(u, v)| u * v).sum());
    for r in 0..m {
        for c in 0..m {
            y.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    y.extend(std::iter::repeat(0.0).take(m * m));
    let (ys, _) = integrate(|s, z| char_rhs(a, s, z, m), t0, &y, &[t], &OdeOptions::with_tol(tol))?;
    let z = &ys[0];
    let off = 2 * m + 1;
    Ok(CharState {
        x: z[..m].to_vec(),
        xi: z[m..2 * m].to_vec(),
        phi: z[2 * m],
        jx: DMatrix::from_row_slice(m, m, &z[off..off + m * m]),
    })
}

struct NodeResult {
    phi: f64,
    momentum: Vec<f64>,
    det: f64,
    ok: bool,
    x0: Vec<f64>,
}

fn invert(
    a: &ReducedSymbol,
    t0: f64,
    t: f64,
    target: &[f64],
    xib: &[f64],
    seed: &[f64],
    opts: &SolveOptions,
) -> NodeResult {
    let m = target.len();
    let mut x0 = seed.to_vec();
    let fail = |x0: Vec<f64>| NodeResult {
        phi: f64::NAN,
        momentum: vec![f64::NAN; m],
        det: 0.0,
        ok: false,
        x0,
    };
    for _ in 0..opts.newton_iters {
        let st = match shoot(a, t0, t, &x0, xib, opts.tol) {
            Ok(s) => s,
            Err(_) => return fail(x0),
        };
        let res = DVector::from_iterator(m, st.x.iter().zip(target).map(|(u, v)| u - v));
        let det = st.jx.determinant();
        if res.amax() < 1e-13 * (1.0 + target.iter().fold(0.0f64, |s, v| s.max(v.abs()))) {
            return NodeResult {
                phi: st.phi,
                momentum: st.xi,
                det,
                ok: det.abs() >= CAUSTIC_DET,
                x0,
            };
        }
        let Some(step) = st.jx.clone().lu().solve(&res) else {
            return fail(x0);
        };
        for k in 0..m {
            x0[k] -= step[k];
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return fail(x0);
        }
    }
    fail(x0)
}

/// Solve for `φ(t, x̄; ξ̄)` on `grid` for every parameter value, starting
/// from the slice `t = t0`.
pub fn solve_phase(
    a: &ReducedSymbol,
    params: &[Vec<f64>],
    t0: f64,
    grid: &PhaseGrid,
    opts: &SolveOptions,
) -> Result<PhaseTable> {
    let n = a.n();
    let m = n - 1;
    if grid.xbar.len() != m {
        return Err(QmlError::Dimension(format!(
            "grid has {} x̄ axes, expected {}",
            grid.xbar.len(),
            m
        )));
    }
    if params.iter().any(|p| p.len() != m) {
        return Err(QmlError::Dimension(format!("parameters must have length {}", m)));
    }
    if grid.t.is_empty() || grid.xbar.iter().any(|ax| ax.is_empty()) {
        return Err(QmlError::InvalidArgument("empty phase grid".into()));
    }
    let nodes = grid.node_count();
    let nt = grid.t.len();
    // march outward from t0 so every inversion is seeded by a neighbour level
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&i, &j| {
        (grid.t[i] - t0)
            .abs()
            .partial_cmp(&(grid.t[j] - t0).abs())
            .unwrap()
            .then(i.cmp(&j))
    });

    let jobs: Vec<(usize, usize)> = (0..params.len())
        .flat_map(|p| (0..nodes).map(move |k| (p, k)))
        .collect();
    let columns: Vec<Vec<NodeResult>> = jobs
        .par_iter()
        .map(|&(pi, k)| {
            let target = grid.node(k);
            let xib = &params[pi];
            let mut out: Vec<Option<NodeResult>> = (0..nt).map(|_| None).collect();
            let mut seed_fwd = target.clone();
            let mut seed_bwd = target.clone();
            for &ti in &order {
                let t = grid.t[ti];
                let seed = if t >= t0 { &seed_fwd } else { &seed_bwd };
                let r = if t == t0 {
                    NodeResult {
                        phi: target.iter().zip(xib).map(|(u, v)| u * v).sum(),
                        momentum: xib.clone(),
                        det: 1.0,
                        ok: true,
                        x0: target.clone(),
                    }
                } else {
                    invert(a, t0, t, &target, xib, seed, opts)
                };
                if r.phi.is_finite() {
                    if t >= t0 {
                        seed_fwd = r.x0.clone();
                    } else {
                        seed_bwd = r.x0.clone();
                    }
                }
                out[ti] = Some(r);
            }
            out.into_iter().map(|r| r.unwrap()).collect()
        })
        .collect();

    let mut values = vec![vec![vec![f64::NAN; nodes]; nt]; params.len()];
    let mut caustic = vec![vec![vec![false; nodes]; nt]; params.len()];
    let mut momentum = vec![vec![vec![Vec::new(); nodes]; nt]; params.len()];
    let mut min_jac = f64::INFINITY;
    let mut flagged = 0;
    for (col, &(pi, k)) in columns.into_iter().zip(&jobs) {
        for (ti, r) in col.into_iter().enumerate() {
            values[pi][ti][k] = r.phi;
            caustic[pi][ti][k] = !r.ok;
            if !r.ok {
                flagged += 1;
            }
            if r.phi.is_finite() {
                min_jac = min_jac.min(r.det.abs());
            }
            momentum[pi][ti][k] = r.momentum;
        }
    }
    Ok(PhaseTable {
        n,
        t0,
        params: params.to_vec(),
        grid: grid.clone(),
        values,
        caustic,
        momentum,
        min_jacobian: min_jac,
        flagged,
    })
}

const D1_5: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub checked_nodes: usize,
    pub skipped_nodes: usize,
}

/// `|∂_t φ − a(t, x̄, ∂_x̄ φ)|` on interior nodes with fourth-order centred
/// differences. Needs uniform axes with at least five points.
pub fn hj_residual(a: &ReducedSymbol, table: &PhaseTable) -> Result<ResidualReport> {
    let g = &table.grid;
    let uniform = |ax: &[f64]| -> Option<f64> {
        if ax.len() < 5 {
            return None;
        }
        let h = ax[1] - ax[0];
        ax.windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0))
            .then_some(h)
    };
    let ht = uniform(&g.t).ok_or_else(|| QmlError::InvalidArgument("t axis must be uniform with ≥ 5 points".into()))?;
    let hx: Vec<f64> = g
        .xbar
        .iter()
        .map(|ax| uniform(ax).ok_or_else(|| QmlError::InvalidArgument("x̄ axes must be uniform with ≥ 5 points".into())))
        .collect::<Result<_>>()?;
    let strides = g.strides();
    let m = g.xbar.len();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for pi in 0..table.params.len() {
        for ti in 2..g.t.len() - 2 {
            'node: for k in 0..g.node_count() {
                let mut idx = vec![0usize; m];
                let mut rem = k;
                for a_ in 0..m {
                    idx[a_] = rem / strides[a_];
                    rem %= strides[a_];
                }
                if idx.iter().zip(&g.xbar).any(|(&i, ax)| i < 2 || i + 2 >= ax.len()) {
                    continue;
                }
                let v = |tt: usize, kk: usize| -> Option<f64> {
                    let val = table.values[pi][tt][kk];
                    (!table.caustic[pi][tt][kk] && val.is_finite()).then_some(val)
                };
                let mut dt = 0.0;
                for (o, c) in D1_5.iter().enumerate() {
                    match v(ti + o - 2, k) {
                        Some(val) => dt += c * val,
                        None => {
                            skipped += 1;
                            continue 'node;
                        }
                    }
                }
                dt /= ht;
                let mut grad = vec![0.0; m];
                for a_ in 0..m {
                    for (o, c) in D1_5.iter().enumerate() {
                        let kk = k + o * strides[a_] - 2 * strides[a_];
                        match v(ti, kk) {
                            Some(val) => grad[a_] += c * val,
                            None => {
                                skipped += 1;
                                continue 'node;
                            }
                        }
                    }
                    grad[a_] /= hx[a_];
                }
                let mut x = vec![g.t[ti]];
                x.extend(g.node(k));
                let av = a.jet(&x, &grad, 0)?.value;
                worst = worst.max((dt - av).abs());
                checked += 1;
            }
        }
    }
    Ok(ResidualReport {
        max_residual: worst,
        checked_nodes: checked,
        skipped_nodes: skipped,
    })
}

impl PhaseTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["param".to_string()];
        header.extend((2..=self.n).map(|i| format!("xi{}", i)));
        header.push("t".into());
        header.extend((2..=self.n).map(|i| format!("x{}", i)));
        header.push("phi".into());
        header.push("caustic".into());
        wr.write_record(&header)?;
        for (pi, xib) in self.params.iter().enumerate() {
            for (ti, t) in self.grid.t.iter().enumerate() {
                for k in 0..self.grid.node_count() {
                    let mut row = vec![pi.to_string()];
                    row.extend(xib.iter().map(|v| v.to_string()));
                    row.push(t.to_string());
                    row.extend(self.grid.node(k).iter().map(|v| v.to_string()));
                    row.push(self.values[pi][ti][k].to_string());
                    row.push((self.caustic[pi][ti][k] as u8).to_string());
                    wr.write_record(&row)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn uniform_axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin_symbol, parse_symbol};

    fn explicit(text: &str, n: usize) -> ReducedSymbol {
        ReducedSymbol::explicit(parse_symbol(text, n).unwrap()).unwrap()
    }

    #[test]
    fn zero_symbol_keeps_initial_phase() {
        let a = explicit("0", 2);
        let grid = PhaseGrid {
            t: uniform_axis(0.0, 0.5, 6),
            xbar: vec![uniform_axis(-0.5, 0.5, 5)],
        };
        let tab = solve_phase(&a, &[vec![0.7]], 0.0, &grid, &SolveOptions::default()).unwrap();
        for ti in 0..6 {
            for k in 0..5 {
                assert!((tab.values[0][ti][k] - grid.node(k)[0] * 0.7).abs() < 1e-14);
            }
        }
        assert_eq!(tab.flagged, 0);
    }

    #[test]
    fn free_quadratic_closed_form() {
        let a = explicit("xi2^2", 2);
        let grid = PhaseGrid {
            t: uniform_axis(-0.3, 0.3, 7),
            xbar: vec![uniform_axis(-0.4, 0.4, 9)],
        };
        let nu = 0.35;
        let tab = solve_phase(&a, &[vec![nu]], 0.0, &grid, &SolveOptions::default()).unwrap();
        for (ti, t) in grid.t.iter().enumerate() {
            for k in 0..9 {
                let want = grid.node(k)[0] * nu + t * nu * nu;
                assert!((tab.values[0][ti][k] - want).abs() < 1e-11);
            }
        }
        let res = hj_residual(&a, &tab).unwrap();
        assert!(res.max_residual < 1e-8 && res.checked_nodes > 0);
    }

    #[test]
    fn model_phase_matches_closed_form() {
        let p = builtin_symbol("model-fold", 2).unwrap();
        let a = ReducedSymbol::Implicit { p, tau_seed: 0.0 };
        let grid = PhaseGrid {
            t: uniform_axis(-0.5, 0.5, 11),
            xbar: vec![uniform_axis(-0.5, 0.5, 11)],
        };
        let tab = solve_phase(&a, &[vec![-0.2], vec![0.3]], 0.0, &grid, &SolveOptions::default()).unwrap();
        for (pi, par) in tab.params.iter().enumerate() {
            let nu = par[0];
            for (ti, t) in grid.t.iter().enumerate() {
                for k in 0..11 {
                    let r = grid.node(k)[0];
                    let want = r * (nu + t) + ((nu + t).powi(3) - nu.powi(3)) / 3.0;
                    assert!((tab.values[pi][ti][k] - want).abs() < 1e-10);
                }
            }
        }
        assert!(hj_residual(&a, &tab).unwrap().max_residual < 1e-6);
    }

    #[test]
    fn three_dimensional_model() {
        let p = builtin_symbol("model-fold", 3).unwrap();
        let a = ReducedSymbol::Implicit { p, tau_seed: 0.0 };
        let grid = PhaseGrid {
            t: uniform_axis(0.0, 0.4, 5),
            xbar: vec![uniform_axis(-0.2, 0.2, 5), uniform_axis(-0.2, 0.2, 5)],
        };
        let tab = solve_phase(&a, &[vec![0.1, 0.2]], 0.0, &grid, &SolveOptions::default()).unwrap();
        assert_eq!(tab.flagged, 0);
        assert!(hj_residual(&a, &tab).unwrap().max_residual < 1e-6);
    }

    #[test]
    fn explicit_rejects_tau() {
        assert!(ReducedSymbol::explicit(parse_symbol("xi1", 2).unwrap()).is_err());
    }
}
