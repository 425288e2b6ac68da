//! Dormand–Prince 5(4) with adaptive steps that land exactly on the
//! requested output times.

use crate::error::{QmlError, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights are the last row of A; these are the error weights (b5 - b4)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> OdeOptions {
        OdeOptions {
            rtol: tol,
            atol: tol,
            max_steps: 1_000_000,
            initial_step: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrate `y' = f(s, y)` from `s0` through each of `times` (monotone,
/// all on the same side of `s0`). Returns the state at every time.
pub fn integrate<F>(
    mut f: F,
    s0: f64,
    y0: &[f64],
    times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, StepStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let dim = y0.len();
    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(times.len());
    let mut s = s0;
    let mut y = y0.to_vec();
    let Some(&last) = times.last() else {
        return Ok((out, stats));
    };
    let dir = if last >= s0 { 1.0 } else { -1.0 };
    for w in times.windows(2) {
        if (w[1] - w[0]) * dir < 0.0 {
            return Err(QmlError::InvalidArgument("output times are not monotone".into()));
        }
    }

    let mut k1 = f(s, &y)?;
    stats.evaluations += 1;
    let mut h = opts.initial_step.unwrap_or_else(|| {
        let span = (last - s0).abs();
        (0.01 * span).max(1e-6).min(span.max(1e-6))
    });
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];

    for &target in times {
        while (target - s) * dir > 0.0 {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(QmlError::Convergence(format!("step limit reached at s = {}", s)));
            }
            let remaining = (target - s).abs();
            let mut step = h.min(remaining);
            // avoid leaving a sliver before the output time
            if remaining - step < 1e-3 * step {
                step = remaining;
            }
            if step < 1e-14 * (1.0 + s.abs()) {
                return Err(QmlError::StepUnderflow { s });
            }
            let hs = step * dir;
            k[0].clone_from(&k1);
            for stage in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        acc += hs * A[stage][j] * kj[i];
                    }
                    tmp[i] = acc;
                }
                k[stage] = f(s + C[stage] * hs, &tmp)?;
                stats.evaluations += 1;
            }
            // stage 7 was evaluated at the fifth-order solution (FSAL)
            let mut err = 0.0f64;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= hs;
                let sc = opts.atol + opts.rtol * y[i].abs().max(tmp[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                stats.rejected += 1;
                h = step * 0.1;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                s = if step == remaining { target } else { s + hs };
                y.clone_from(&tmp);
                k1 = k[6].clone();
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // keep the nominal step when the last one was clipped to hit an output time
                h = (step * fac).max(if step < h { h } else { 0.0 });
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
