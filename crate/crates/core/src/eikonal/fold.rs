//! Fold quantities of the phase and classification of the two projections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{hj_residual, solve_phase, uniform_axis, PhaseGrid, PhaseTable, ReducedSymbol, SolveOptions};
use crate::error::{QmlError, Result};
use crate::flow::r_derivatives;
use crate::symbol::{Expr, PhasePoint, SymbolFn, Var, VarKind};

pub const NORMALIZATION_TOL: f64 = 1e-8;

const D1_5: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
const D2_5: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldClass {
    Nondegenerate,
    Fold,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldClassification {
    pub class: FoldClass,
    pub det: f64,
    /// `D_v(det dF)` along the kernel direction, when the corank is one.
    pub kernel_derivative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Phase derivatives in `(t, ν)` at the base point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldQuantities {
    pub d3_tnn: f64,
    pub d3_ttn: f64,
    pub phi_tt: f64,
    pub phi_tn: f64,
    pub phi_nn: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldOptions {
    pub closed_threshold: f64,
    pub numeric_threshold: f64,
    pub spacing: f64,
    pub ode_tol: f64,
    pub numeric: bool,
    /// Half-width and node count of the grid used for the residual check.
    pub residual_half_width: f64,
    pub residual_nodes: usize,
}

impl Default for FoldOptions {
    fn default() -> Self {
        FoldOptions {
            closed_threshold: 1e-6,
            numeric_threshold: 1e-3,
            spacing: 1e-2,
            ode_tol: 1e-12,
            numeric: true,
            residual_half_width: 0.2,
            residual_nodes: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub base_x: Vec<f64>,
    pub base_xibar: Vec<f64>,
    pub method: String,
    pub d3_tnn: f64,
    pub d3_ttn: f64,
    pub e0: f64,
    pub rddot_from_phase: f64,
    pub pi_l: FoldClassification,
    pub pi_r: FoldClassification,
    pub closed: Option<FoldQuantities>,
    pub numeric: Option<FoldQuantities>,
    /// `|numeric − closed| / max(|closed|, 1)` for `(d3_tnn, d3_ttn)`.
    pub closed_vs_numeric: Option<(f64, f64)>,
    pub rddot_flow: Option<f64>,
    pub rddot_relative_error: Option<f64>,
    pub hj_residual: Option<f64>,
    pub threshold: f64,
}

/// Closed forms from the jets of `a`, valid on the initial slice when
/// `∂_ξ̄ a = 0` at the base point.
pub fn phase_fold_quantities_closed(a: &ReducedSymbol, x0: &[f64], xibar0: &[f64]) -> Result<FoldQuantities> {
    let n = a.n();
    let j = a.jet(x0, xibar0, 2)?;
    let worst = (0..n - 1).map(|k| j.d1(n + k).abs()).fold(0.0, f64::max);
    if worst > NORMALIZATION_TOL {
        return Err(QmlError::Normalization(format!(
            "|∂_ξ̄ a| = {:e} exceeds {:e}; adapt the coordinates so the base point is normalised",
            worst, NORMALIZATION_TOL
        )));
    }
    let nu = 2 * n - 2;
    let mut d3_ttn = j.d2(0, nu);
    let mut phi_tt = j.d1(0);
    for k in 0..n - 1 {
        d3_ttn += j.d2(n + k, nu) * j.d1(1 + k);
        phi_tt += j.d1(n + k) * j.d1(1 + k);
    }
    Ok(FoldQuantities {
        d3_tnn: j.d2(nu, nu),
        d3_ttn,
        phi_tt,
        phi_tn: j.d1(nu),
        phi_nn: 0.0,
    })
}

/// Table with the `(t, ν)` stencil needed by the numeric fold quantities.
pub fn fold_stencil_table(a: &ReducedSymbol, x0: &[f64], xibar0: &[f64], h: f64, tol: f64) -> Result<PhaseTable> {
    let m = xibar0.len();
    let params: Vec<Vec<f64>> = (-2..=2)
        .map(|o| {
            let mut p = xibar0.to_vec();
            p[m - 1] += o as f64 * h;
            p
        })
        .collect();
    let grid = PhaseGrid {
        t: (-2..=2).map(|o| x0[0] + o as f64 * h).collect(),
        xbar: x0[1..].iter().map(|&v| vec![v]).collect(),
    };
    solve_phase(a, &params, x0[0], &grid, &SolveOptions { tol, newton_iters: 30 })
}

/// Five-point centred differences on a table from [`fold_stencil_table`].
pub fn phase_fold_quantities_numeric(table: &PhaseTable) -> Result<FoldQuantities> {
    if table.params.len() != 5 || table.grid.t.len() != 5 || table.grid.node_count() != 1 {
        return Err(QmlError::InvalidArgument(
            "numeric fold quantities need a 5×5 (t, ν) stencil at one node".into(),
        ));
    }
    let h = table.grid.t[1] - table.grid.t[0];
    let m = table.params[0].len();
    let hn = table.params[1][m - 1] - table.params[0][m - 1];
    if ((h - hn) / h).abs() > 1e-9 {
        return Err(QmlError::InvalidArgument("t and ν spacings differ".into()));
    }
    let mut phi = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            if table.caustic[i][j][0] || !table.values[i][j][0].is_finite() {
                return Err(QmlError::Convergence("stencil touches a caustic or failed node".into()));
            }
            phi[i][j] = table.values[i][j][0];
        }
    }
    // phi[param offset][t offset]
    let mix = |ci: &[f64; 5], cj: &[f64; 5]| -> f64 {
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                s += ci[i] * cj[j] * phi[i][j];
            }
        }
        s
    };
    let unit = [0.0, 0.0, 1.0, 0.0, 0.0];
    Ok(FoldQuantities {
        d3_tnn: mix(&D2_5, &D1_5) / h.powi(3),
        d3_ttn: mix(&D1_5, &D2_5) / h.powi(3),
        phi_tt: mix(&unit, &D2_5) / (h * h),
        phi_tn: mix(&D1_5, &D1_5) / (h * h),
        phi_nn: mix(&D2_5, &unit) / (h * h),
    })
}

/// Nondegenerate / fold / degenerate, from `dF` and `∇(det dF)`.
pub fn classify_fold_map(df: &DMatrix<f64>, grad_det: &DVector<f64>, threshold: f64) -> Result<FoldClassification> {
    let d = df.nrows();
    if d == 0 || df.ncols() != d || grad_det.len() != d {
        return Err(QmlError::Dimension(
            "classify_fold_map needs a square dF and matching gradient".into(),
        ));
    }
    let det = df.determinant();
    if det.abs() > threshold {
        return Ok(FoldClassification {
            class: FoldClass::Nondegenerate,
            det,
            kernel_derivative: None,
            reason: None,
        });
    }
    let svd = df.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    if d >= 2 && svd.singular_values[order[1]] <= threshold {
        return Ok(FoldClassification {
            class: FoldClass::Degenerate,
            det,
            kernel_derivative: None,
            reason: Some("rank of dF below d − 1".into()),
        });
    }
    let v = v_t.row(order[0]).transpose();
    let dv = grad_det.dot(&v);
    if dv.abs() > threshold {
        Ok(FoldClassification {
            class: FoldClass::Fold,
            det,
            kernel_derivative: Some(dv),
            reason: None,
        })
    } else {
        Ok(FoldClassification {
            class: FoldClass::Degenerate,
            det,
            kernel_derivative: Some(dv),
            reason: Some("det dF does not vanish simply along the kernel".into()),
        })
    }
}

/// Classify `π_L: (t, ν) ↦ (t, φ_t)` and `π_R: (t, ν) ↦ (ν, −φ_ν)`.
pub fn classify_projections(q: &FoldQuantities, threshold: f64) -> Result<(FoldClassification, FoldClassification)> {
    let grad = DVector::from_vec(vec![q.d3_ttn, q.d3_tnn]);
    let dl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, q.phi_tt, q.phi_tn]);
    let dr = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -q.phi_tn, -q.phi_nn]);
    Ok((
        classify_fold_map(&dl, &grad, threshold)?,
        classify_fold_map(&dr, &grad, threshold)?,
    ))
}

impl ReducedSymbol {
    /// The symbol whose zero set defines `a`; `τ − a` for an explicit `a`.
    pub fn full_symbol(&self) -> Result<SymbolFn> {
        match self {
            ReducedSymbol::Implicit { p, .. } => Ok(p.clone()),
            ReducedSymbol::Explicit(a) => SymbolFn::from_expr(
                Expr::Sub(
                    Box::new(Expr::Var(Var {
                        kind: VarKind::Xi,
                        index: 0,
                    })),
                    Box::new((*a.expr).clone()),
                ),
                a.n,
            ),
        }
    }
}

fn rel(num: f64, closed: f64) -> f64 {
    (num - closed).abs() / closed.abs().max(1.0)
}

/// Fold analysis at `(x0, ξ̄0)`: closed forms, optional numeric cross-check
/// from the solved phase, and the `r̈` consistency check when `r` is given.
pub fn fold_report(
    a: &ReducedSymbol,
    x0: &[f64],
    xibar0: &[f64],
    r: Option<&SymbolFn>,
    opts: &FoldOptions,
) -> Result<FoldReport> {
    let n = a.n();
    if x0.len() != n || xibar0.len() != n - 1 {
        return Err(QmlError::Dimension(format!(
            "base point needs x of length {} and xibar of length {}",
            n,
            n - 1
        )));
    }
    let closed = phase_fold_quantities_closed(a, x0, xibar0)?;
    let e0 = a.e_factor(x0, xibar0)?;
    let (numeric, residual) = if opts.numeric {
        let tab = fold_stencil_table(a, x0, xibar0, opts.spacing, opts.ode_tol)?;
        let q = phase_fold_quantities_numeric(&tab)?;
        let w = opts.residual_half_width;
        let k = opts.residual_nodes.max(5);
        let grid = PhaseGrid {
            t: uniform_axis(x0[0] - w, x0[0] + w, k),
            xbar: x0[1..].iter().map(|&v| uniform_axis(v - w, v + w, k)).collect(),
        };
        let rt = solve_phase(
            a,
            &[xibar0.to_vec()],
            x0[0],
            &grid,
            &SolveOptions {
                tol: opts.ode_tol,
                newton_iters: 30,
            },
        )?;
        (Some(q), Some(hj_residual(a, &rt)?.max_residual))
    } else {
        (None, None)
    };
    let (pi_l, pi_r) = classify_projections(&closed, opts.closed_threshold)?;
    let rddot_from_phase = -e0 * closed.d3_ttn;
    let rddot_flow = match r {
        Some(r) => {
            let p = a.full_symbol()?;
            let av = a.jet(x0, xibar0, 0)?.value;
            let mut xi = vec![av];
            xi.extend_from_slice(xibar0);
            Some(r_derivatives(&p, r, &PhasePoint::new(x0.to_vec(), xi))?.1)
        }
        None => None,
    };
    Ok(FoldReport {
        base_x: x0.to_vec(),
        base_xibar: xibar0.to_vec(),
        method: if numeric.is_some() {
            "closed-form+numeric-HJ"
        } else {
            "closed-form"
        }
        .into(),
        d3_tnn: closed.d3_tnn,
        d3_ttn: closed.d3_ttn,
        e0,
        rddot_from_phase,
        pi_l,
        pi_r,
        closed_vs_numeric: numeric.map(|q| (rel(q.d3_tnn, closed.d3_tnn), rel(q.d3_ttn, closed.d3_ttn))),
        closed: Some(closed),
        numeric,
        rddot_relative_error: rddot_flow.map(|f| (rddot_from_phase - f).abs() / f.abs().max(1e-300)),
        rddot_flow,
        hj_residual: residual,
        threshold: opts.closed_threshold,
    })
}
