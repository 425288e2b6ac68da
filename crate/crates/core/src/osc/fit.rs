//! Least-squares fit of `log y = slope · log x + c` for scaling experiments.

use serde::{Deserialize, Serialize};

use crate::error::{QmlError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target: Option<f64>,
    pub margin: Option<f64>,
    /// `|slope − target| ≤ margin`, when both are given.
    pub pass: Option<bool>,
}

pub const MIN_FIT_SAMPLES: usize = 4;

pub fn scaling_fit(samples: &[(f64, f64)], target: Option<f64>, margin: Option<f64>) -> Result<ScalingFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(QmlError::InsufficientSamples(format!(
            "a scaling fit needs at least {} samples, got {}",
            MIN_FIT_SAMPLES,
            samples.len()
        )));
    }
    if let Some(&(x, y)) = samples.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(QmlError::NonPositiveSample(format!(
            "cannot take the log of ({}, {})",
            x, y
        )));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(QmlError::InsufficientSamples("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let pass = match (target, margin) {
        (Some(t), Some(m)) => Some((slope - t).abs() <= m),
        _ => None,
    };
    Ok(ScalingFit {
        samples: samples.to_vec(),
        slope,
        intercept,
        r2,
        target,
        margin,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(-0.5)))
            .collect();
        let f = scaling_fit(&s, Some(-0.5), Some(0.05)).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12 && f.pass == Some(true));
    }

    #[test]
    fn rejects_bad_input() {
        let s = [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        assert!(matches!(
            scaling_fit(&s, None, None),
            Err(QmlError::InsufficientSamples(_))
        ));
        let s = [(1.0, 1.0), (2.0, 0.5), (4.0, 0.0), (8.0, 0.1)];
        assert!(matches!(
            scaling_fit(&s, None, None),
            Err(QmlError::NonPositiveSample(_))
        ));
    }
}
