//! Norm sweeps over λ (fixed phase) and over h (the operator `Z` built from
//! a solved eikonal phase).

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{
    build_osc_operator, operator_norm, resolved_axes, Bump, LinearOperator, OscPhase, PowerOptions, StructuredOperator,
    DEFAULT_POINTS_PER_PERIOD,
};
use crate::eikonal::cheb::{cheb_nodes, Cheb2};
use crate::eikonal::{solve_phase, PhaseGrid, ReducedSymbol, SolveOptions};
use crate::error::{QmlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorMethod {
    /// Structured when the phase splits, dense otherwise.
    Auto,
    Dense,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscSettings {
    pub points_per_period: f64,
    pub method: OperatorMethod,
    pub min_len: usize,
    /// Bytes allowed for one dense matrix.
    pub memory_budget: u64,
    pub power: PowerOptions,
}

impl Default for OscSettings {
    fn default() -> Self {
        OscSettings {
            points_per_period: DEFAULT_POINTS_PER_PERIOD,
            method: OperatorMethod::Auto,
            min_len: 64,
            memory_budget: 1 << 31,
            power: PowerOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// λ for fixed-phase sweeps, h for the `Z` sweep.
    pub param: f64,
    /// L² → L² norm, prefactor included.
    pub norm: f64,
    pub rows: usize,
    pub cols: usize,
    pub method: OperatorMethod,
    pub iterations: usize,
}

/// `‖prefactor · T_λ‖_{L²→L²}` on automatically resolved grids.
pub fn osc_norm(phase: &OscPhase, amp: &Bump, lambda: f64, prefactor: f64, s: &OscSettings) -> Result<SweepRow> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(QmlError::InvalidArgument(format!("λ must be positive, got {}", lambda)));
    }
    let (xa, ya) = resolved_axes(phase, amp, lambda, s.points_per_period, s.min_len)?;
    let dense_bytes = (xa.len as u64) * (ya.len as u64) * 16;
    let fits = dense_bytes <= s.memory_budget;
    let dense = || -> Result<Box<dyn LinearOperator>> {
        if !fits {
            return Err(QmlError::MemoryBudget {
                needed: dense_bytes,
                budget: s.memory_budget,
            });
        }
        Ok(Box::new(build_osc_operator(
            phase,
            amp,
            lambda,
            &xa,
            &ya,
            s.points_per_period,
        )?))
    };
    let (op, method): (Box<dyn LinearOperator>, OperatorMethod) = match s.method {
        OperatorMethod::Dense => (dense()?, OperatorMethod::Dense),
        _ => match StructuredOperator::try_build(phase, amp, lambda, &xa, &ya, s.points_per_period, s.power.seed)? {
            Some(op) => (Box::new(op), OperatorMethod::Structured),
            None if s.method == OperatorMethod::Auto => (dense()?, OperatorMethod::Dense),
            None => {
                return Err(QmlError::InvalidArgument(
                    "phase is not of the form A(x) + B(y) + G(x ∓ y); use the dense method".into(),
                ))
            }
        },
    };
    let est = operator_norm(op.as_ref(), &s.power)?;
    Ok(SweepRow {
        param: lambda,
        norm: prefactor.abs() * est.sigma * (xa.spacing / ya.spacing).sqrt(),
        rows: xa.len,
        cols: ya.len,
        method,
        iterations: est.iterations,
    })
}

pub fn lambda_sweep(phase: &OscPhase, amp: &Bump, lambdas: &[f64], s: &OscSettings) -> Result<Vec<SweepRow>> {
    lambdas.par_iter().map(|&l| osc_norm(phase, amp, l, 1.0, s)).collect()
}

/// Tabulate `φ(t, x̄ = 0; ν)` for `n = 2` on `[-2w, 2w]²` and wrap it as
/// an operator phase in `(t, ν)`.
pub fn z_phase(a: &ReducedSymbol, width: f64, nodes: usize, opts: &SolveOptions) -> Result<OscPhase> {
    if a.n() != 2 {
        return Err(QmlError::Dimension(format!(
            "the Z operator sweep is implemented for n = 2, got n = {}",
            a.n()
        )));
    }
    let l = 2.0 * width;
    let ts = cheb_nodes(-l, l, nodes);
    let nus = cheb_nodes(-l, l, nodes);
    let params: Vec<Vec<f64>> = nus.iter().map(|&v| vec![v]).collect();
    let grid = PhaseGrid {
        t: ts.clone(),
        xbar: vec![vec![0.0]],
    };
    let tab = solve_phase(a, &params, 0.0, &grid, opts)?;
    if tab.flagged > 0 {
        return Err(QmlError::Domain(format!(
            "{} phase nodes hit a caustic or failed to converge; shrink the width",
            tab.flagged
        )));
    }
    let mut values = Vec::with_capacity(nodes * nodes);
    for ti in 0..nodes {
        for pi in 0..nodes {
            values.push(tab.values[pi][ti][0]);
        }
    }
    Ok(OscPhase::Table(Arc::new(Cheb2::new(ts, nus, values)?)))
}

/// `‖(2πh)^{-1/2} T_{1/h}‖` for each `h`, with `T` built from `phase`.
pub fn z_sweep(phase: &OscPhase, amp: &Bump, hs: &[f64], s: &OscSettings) -> Result<Vec<SweepRow>> {
    hs.par_iter()
        .map(|&h| {
            if !(h > 0.0) {
                return Err(QmlError::InvalidArgument(format!("h must be positive, got {}", h)));
            }
            let mut row = osc_norm(phase, amp, 1.0 / h, (2.0 * PI * h).powf(-0.5), s)?;
            row.param = h;
            Ok(row)
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda_or_h", "norm", "rows", "cols"])?;
    for r in rows {
        out.write_record([
            format!("{:e}", r.param),
            format!("{:.12e}", r.norm),
            r.rows.to_string(),
            r.cols.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::builtin_symbol;

    #[test]
    fn z_phase_reproduces_closed_form() {
        let p = builtin_symbol("model-fold", 2).unwrap();
        let a = ReducedSymbol::Implicit { p, tau_seed: 0.0 };
        let OscPhase::Table(c) = z_phase(&a, 0.8, 12, &SolveOptions::default()).unwrap() else {
            panic!("expected a table")
        };
        for &(t, v) in &[(0.3f64, -0.2f64), (-1.5, 1.1), (1.6, 1.6), (0.0, -0.9)] {
            let want = ((t + v).powi(3) - v.powi(3)) / 3.0;
            assert!((c.eval(t, v) - want).abs() < 1e-9, "{} {}", t, v);
        }
    }

    #[test]
    fn structured_and_dense_norms_agree() {
        let phase = OscPhase::parse("(x1 - x2)^3/3").unwrap();
        let amp = Bump::square(0.8);
        let dense = OscSettings {
            method: OperatorMethod::Dense,
            ..Default::default()
        };
        let st = OscSettings {
            method: OperatorMethod::Structured,
            ..Default::default()
        };
        let a = osc_norm(&phase, &amp, 32.0, 1.0, &dense).unwrap();
        let b = osc_norm(&phase, &amp, 32.0, 1.0, &st).unwrap();
        assert_eq!(b.method, OperatorMethod::Structured);
        assert!((a.norm - b.norm).abs() < 1e-8 * a.norm);
    }

    #[test]
    fn memory_budget_is_enforced() {
        let phase = OscPhase::parse("x1^2*x2^2").unwrap();
        let s = OscSettings {
            memory_budget: 1 << 16,
            ..Default::default()
        };
        let r = osc_norm(&phase, &Bump::square(0.5), 256.0, 1.0, &s);
        assert!(matches!(r, Err(QmlError::MemoryBudget { .. })));
    }
}
