//! Bicharacteristic flow `x' = ∂_ξ p`, `ξ' = −∂_x p` and observables on it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QmlError, Result};
use crate::ode::{integrate, OdeOptions, StepStats};
use crate::symbol::{eval_gradient, poisson_bracket, PhaseFn, PhasePoint, SymbolFn};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub s: f64,
    pub point: PhasePoint,
    /// `p(z(s)) − p(z(s_init))`
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub samples: Vec<FlowSample>,
    pub tol: f64,
    pub max_drift: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.s).collect()
    }

    /// Drift bound every trajectory must respect.
    pub fn drift_bound(&self) -> f64 {
        let span = match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.s - a.s).abs(),
            _ => 0.0,
        };
        10.0 * self.tol * (1.0 + span)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["s".to_string()];
        header.extend((1..=self.n).map(|i| format!("x{}", i)));
        header.extend((1..=self.n).map(|i| format!("xi{}", i)));
        header.push("p-drift".into());
        wr.write_record(&header)?;
        for smp in &self.samples {
            let mut row = vec![smp.s.to_string()];
            row.extend(smp.point.x.iter().map(|v| v.to_string()));
            row.extend(smp.point.xi.iter().map(|v| v.to_string()));
            row.push(smp.drift.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn hamilton_rhs(p: &SymbolFn, z: &[f64]) -> Result<Vec<f64>> {
    let n = p.n;
    let g = eval_gradient(p, &PhasePoint::from_concat(z))?;
    let mut dz = vec![0.0; 2 * n];
    for i in 0..n {
        dz[i] = g[n + i];
        dz[n + i] = -g[i];
    }
    Ok(dz)
}

/// Integrate from `init` (taken at `s_init`) to every time in `times`,
/// which may lie on both sides of `s_init`.
pub fn integrate_flow_times(
    p: &SymbolFn,
    init: &PhasePoint,
    s_init: f64,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(QmlError::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            tol
        )));
    }
    if init.dim() != p.n || init.xi.len() != p.n {
        return Err(QmlError::Dimension(format!(
            "initial point has dimension {}, symbol has n = {}",
            init.dim(),
            p.n
        )));
    }
    let mut sorted = times.to_vec();
    if sorted.iter().any(|t| !t.is_finite()) {
        return Err(QmlError::InvalidArgument("non-finite sample time".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();

    let z0 = init.concat();
    let p0 = p.value(init)?;
    let opts = OdeOptions::with_tol(tol);
    let rhs = |_: f64, z: &[f64]| hamilton_rhs(p, z);

    let back: Vec<f64> = sorted.iter().rev().copied().filter(|&t| t < s_init).collect();
    let fwd: Vec<f64> = sorted.iter().copied().filter(|&t| t >= s_init).collect();
    let (yb, sb) = integrate(rhs, s_init, &z0, &back, &opts)?;
    let (yf, sf) = integrate(rhs, s_init, &z0, &fwd, &opts)?;

    let mut samples = Vec::with_capacity(sorted.len());
    for (t, z) in back.iter().zip(yb).rev().chain(fwd.iter().zip(yf)) {
        let point = PhasePoint::from_concat(&z);
        let drift = p.value(&point)? - p0;
        samples.push(FlowSample { s: *t, point, drift });
    }
    let stats = StepStats {
        accepted: sb.accepted + sf.accepted,
        rejected: sb.rejected + sf.rejected,
        evaluations: sb.evaluations + sf.evaluations,
    };
    Ok(Trajectory {
        n: p.n,
        max_drift: samples.iter().map(|s| s.drift.abs()).fold(0.0, f64::max),
        samples,
        tol,
        steps_accepted: stats.accepted,
        steps_rejected: stats.rejected,
    })
}

/// Flow over `span = [s0, s1]` starting at `init` when `s = s0`, sampled at
/// `n_samples` equally spaced times including both ends.
pub fn integrate_flow(
    p: &SymbolFn,
    init: &PhasePoint,
    span: (f64, f64),
    tol: f64,
    n_samples: usize,
) -> Result<Trajectory> {
    let (s0, s1) = span;
    let times: Vec<f64> = if s0 == s1 || n_samples < 2 {
        vec![s0]
    } else {
        (0..n_samples)
            .map(|k| s0 + (s1 - s0) * k as f64 / (n_samples - 1) as f64)
            .collect()
    };
    integrate_flow_times(p, init, s0, &times, tol)
}

pub fn observable_along_flow(traj: &Trajectory, g: &PhaseFn) -> Result<Vec<(f64, f64)>> {
    if g.dim() != traj.n {
        return Err(QmlError::Dimension(format!(
            "observable has dimension {}, trajectory {}",
            g.dim(),
            traj.n
        )));
    }
    traj.samples.iter().map(|s| Ok((s.s, g.value(&s.point)?))).collect()
}

/// `(ṙ, r̈) = ({p, r}, {p, {p, r}})` at `pt`.
pub fn r_derivatives(p: &SymbolFn, r: &SymbolFn, pt: &PhasePoint) -> Result<(f64, f64)> {
    let pr = poisson_bracket(p.clone(), r.clone())?;
    let rdot = pr.value(pt)?;
    let ppr = poisson_bracket(p.clone(), pr)?;
    Ok((rdot, ppr.value(pt)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{builtin_symbol, parse_symbol};

    #[test]
    fn model_flow_closed_form() {
        let p = builtin_symbol("model-fold", 2).unwrap();
        let tr = integrate_flow(&p, &PhasePoint::origin(2), (0.0, 1.0), 1e-10, 11).unwrap();
        for s in &tr.samples {
            let t = s.s;
            let want = [t, -t * t, 0.0, t];
            let got = s.point.concat();
            for (a, b) in want.iter().zip(&got) {
                assert!((a - b).abs() < 1e-8, "s = {}: {:?}", t, got);
            }
        }
        assert!(tr.max_drift <= tr.drift_bound());
    }

    #[test]
    fn elliptic_straight_line() {
        let p = builtin_symbol("flat-elliptic", 2).unwrap();
        let init = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let tr = integrate_flow(&p, &init, (0.0, 0.5), 1e-10, 3).unwrap();
        let last = &tr.samples[2].point;
        assert!((last.x[0] - 1.0).abs() < 1e-10 && last.x[1].abs() < 1e-12);
    }

    #[test]
    fn zero_span_is_init() {
        let p = builtin_symbol("model-fold", 3).unwrap();
        let init = PhasePoint::new(vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]);
        let tr = integrate_flow(&p, &init, (0.0, 0.0), 1e-10, 10).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].point, init);
    }

    #[test]
    fn r_derivative_examples() {
        let p = builtin_symbol("model-fold", 2).unwrap();
        let r = parse_symbol("x2", 2).unwrap();
        assert_eq!(r_derivatives(&p, &r, &PhasePoint::origin(2)).unwrap(), (0.0, -2.0));

        let e = builtin_symbol("flat-elliptic", 2).unwrap();
        let pt = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(r_derivatives(&e, &r, &pt).unwrap(), (0.0, 0.0));
        let curved = parse_symbol("x2 - x1^2/2", 2).unwrap();
        let (rd, rdd) = r_derivatives(&e, &curved, &pt).unwrap();
        assert!(rd.abs() < 1e-15 && (rdd + 4.0).abs() < 1e-14);
    }
}
