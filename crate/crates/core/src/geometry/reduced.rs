//! The reduced symbol `a(x, ξ̄)` defined by `p(x, a, ξ̄) = 0` near a point
//! where `∂_τ p ≠ 0`.

use crate::error::{QmlError, Result};
use crate::symbol::{eval_jet, Jet, PhasePoint, SymbolFn};

const MAX_NEWTON: usize = 50;
const MIN_DTAU: f64 = 1e-8;

/// Newton iteration in `τ` for `p(x, τ, ξ̄) = 0`.
pub fn solve_a(p: &SymbolFn, x: &[f64], xibar: &[f64], tau_seed: f64) -> Result<f64> {
    let n = p.n;
    if x.len() != n || xibar.len() != n - 1 {
        return Err(QmlError::Dimension(format!(
            "reduced symbol needs x of length {} and xibar of length {}",
            n,
            n - 1
        )));
    }
    let mut xi = Vec::with_capacity(n);
    xi.push(tau_seed);
    xi.extend_from_slice(xibar);
    let mut pt = PhasePoint::new(x.to_vec(), xi);
    for _ in 0..MAX_NEWTON {
        let j = eval_jet(p, &pt, 1)?;
        if j.value.abs() < 1e-13 {
            return Ok(pt.xi[0]);
        }
        let dtau = j.d1(n);
        if dtau.abs() < MIN_DTAU {
            return Err(QmlError::Convergence(format!(
                "|∂_τ p| = {:e} below {:e} at τ = {}",
                dtau.abs(),
                MIN_DTAU,
                pt.xi[0]
            )));
        }
        let step = j.value / dtau;
        pt.xi[0] -= step;
        if step.abs() < 1e-15 * (1.0 + pt.xi[0].abs()) {
            break;
        }
    }
    let res = p.value(&pt)?;
    if res.abs() < 1e-12 {
        Ok(pt.xi[0])
    } else {
        Err(QmlError::Convergence(format!(
            "no root in τ after {} iterations (|p| = {:e})",
            MAX_NEWTON, res
        )))
    }
}

/// Jet of `a` to order 2 over the reduced variables `(x1..xn, ξ2..ξn)`,
/// by implicit differentiation of `p(x, a(x, ξ̄), ξ̄) = 0`.
pub fn reduced_jet(p: &SymbolFn, x: &[f64], xibar: &[f64], tau_seed: f64, order: usize) -> Result<Jet> {
    if order > 2 {
        return Err(QmlError::Order(order));
    }
    let n = p.n;
    let a = solve_a(p, x, xibar, tau_seed)?;
    let mut xi = vec![a];
    xi.extend_from_slice(xibar);
    let pj = eval_jet(p, &PhasePoint::new(x.to_vec(), xi), order)?;
    let dim = 2 * n - 1;
    // reduced index -> slot in the full phase-space jet
    let slot = |i: usize| if i < n { i } else { i + 1 };
    let tau = n;
    let mut out = Jet::zeros(dim, order);
    out.value = a;
    if order == 0 {
        return Ok(out);
    }
    let pt = pj.d1(tau);
    if pt.abs() < MIN_DTAU {
        return Err(QmlError::Convergence(format!("|∂_τ p| = {:e} at the root", pt.abs())));
    }
    for i in 0..dim {
        out.gradient[i] = -pj.d1(slot(i)) / pt;
    }
    if order == 2 {
        let ptt = pj.d2(tau, tau);
        for i in 0..dim {
            for j in i..dim {
                let (si, sj) = (slot(i), slot(j));
                let (ai, aj) = (out.gradient[i], out.gradient[j]);
                let v = -(pj.d2(si, sj) + pj.d2(si, tau) * aj + pj.d2(sj, tau) * ai + ptt * ai * aj) / pt;
                out.set_d2(i, j, v);
            }
        }
    }
    Ok(out)
}

/// `∂_τ p` at the characteristic point above `(x, ξ̄)`.
pub fn tau_derivative(p: &SymbolFn, x: &[f64], xibar: &[f64], tau_seed: f64) -> Result<f64> {
    let a = solve_a(p, x, xibar, tau_seed)?;
    let mut xi = vec![a];
    xi.extend_from_slice(xibar);
    Ok(eval_jet(p, &PhasePoint::new(x.to_vec(), xi), 1)?.d1(p.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin_symbol, parse_symbol};

    #[test]
    fn model_reduced_symbol() {
        let p = builtin_symbol("model-fold", 3).unwrap();
        let x = [0.2, -0.1, 0.35];
        let xb = [0.3, -0.4];
        let a = solve_a(&p, &x, &xb, 0.0).unwrap();
        assert!((a - (0.35 + 0.09 + 0.16)).abs() < 1e-12);
        let j = reduced_jet(&p, &x, &xb, 0.0, 2).unwrap();
        // a = x3 + xi2^2 + xi3^2 over (x1, x2, x3, xi2, xi3)
        assert!((j.d1(2) - 1.0).abs() < 1e-12);
        assert!((j.d1(3) - 0.6).abs() < 1e-12);
        assert!((j.d2(3, 3) - 2.0).abs() < 1e-12);
        assert!((j.d2(4, 4) - 2.0).abs() < 1e-12);
        assert!(j.d2(3, 4).abs() < 1e-12);
    }

    #[test]
    fn elliptic_reduced_symbol() {
        let p = builtin_symbol("flat-elliptic", 2).unwrap();
        let a = solve_a(&p, &[0.0, 0.0], &[0.6], 1.0).unwrap();
        assert!((a - 0.8).abs() < 1e-12);
        let j = reduced_jet(&p, &[0.0, 0.0], &[0.0], 1.0, 2).unwrap();
        assert!((j.value - 1.0).abs() < 1e-12);
        assert!((j.d2(2, 2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_and_failing_cases() {
        let p = parse_symbol("xi1", 2).unwrap();
        assert_eq!(solve_a(&p, &[0.3, 0.1], &[0.5], 2.0).unwrap(), 0.0);
        let q = parse_symbol("xi1^2 + 1", 2).unwrap();
        assert!(solve_a(&q, &[0.0, 0.0], &[0.0], 0.5).is_err());
    }
}
