//! Sampled checks of the admissibility and curvature assumptions.

pub mod reduced;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use reduced::{reduced_jet, solve_a, tau_derivative};

use crate::error::{QmlError, Result};
use crate::symbol::{eval_jet, poisson_bracket, Arity, PhaseFn, PhasePoint, SymbolFn};

pub const CHAR_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: Vec<(f64, f64)>,
    pub xi: Vec<(f64, f64)>,
    /// Grid points per axis, `x` axes first.
    pub samples: Vec<usize>,
}

impl Region {
    pub fn cube(n: usize, x_half: f64, xi_half: f64, samples: usize) -> Region {
        Region {
            x: vec![(-x_half, x_half); n],
            xi: vec![(-xi_half, xi_half); n],
            samples: vec![samples; 2 * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.x.len() != n || self.xi.len() != n {
            return Err(QmlError::Dimension(format!(
                "region has {} x and {} xi intervals, expected {}",
                self.x.len(),
                self.xi.len(),
                n
            )));
        }
        if self.samples.len() != 2 * n {
            return Err(QmlError::Dimension(format!(
                "region needs {} sample counts, got {}",
                2 * n,
                self.samples.len()
            )));
        }
        if self.samples.iter().any(|&k| k < 2) {
            return Err(QmlError::InvalidArgument("sample counts must be at least 2".into()));
        }
        for &(lo, hi) in self.x.iter().chain(&self.xi) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(QmlError::InvalidArgument(format!(
                    "empty or invalid interval [{}, {}]",
                    lo, hi
                )));
            }
        }
        Ok(())
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.x.iter().chain(&self.xi).copied().collect()
    }

    pub fn contains(&self, z: &[f64], slack: f64) -> bool {
        self.bounds()
            .iter()
            .zip(z)
            .all(|(&(lo, hi), &v)| v >= lo - slack && v <= hi + slack)
    }

    fn grid_size(&self) -> usize {
        self.samples.iter().fold(1usize, |acc, &k| acc.saturating_mul(k))
    }

    /// Seed points: the full tensor grid when it has at most `max` nodes,
    /// otherwise `max` uniform random points drawn from `seed`.
    pub fn seeds(&self, max: usize, seed: u64) -> Vec<Vec<f64>> {
        let b = self.bounds();
        let total = self.grid_size();
        if total <= max {
            let mut out = Vec::with_capacity(total);
            let mut idx = vec![0usize; b.len()];
            for _ in 0..total {
                out.push(
                    idx.iter()
                        .zip(&b)
                        .zip(&self.samples)
                        .map(|((&i, &(lo, hi)), &k)| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                        .collect(),
                );
                for (a, i) in idx.iter_mut().enumerate() {
                    *i += 1;
                    if *i < self.samples[a] {
                        break;
                    }
                    *i = 0;
                }
            }
            out
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..max)
                .map(|_| b.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect())
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryOptions {
    pub a1_threshold: f64,
    pub a2_threshold: f64,
    pub a3_threshold: f64,
    /// Cap on characteristic points kept (the `N` of the sampler).
    pub max_points: usize,
    /// Cap on seeds drawn from the region.
    pub max_seeds: usize,
    /// Samples per curve when scanning for tangencies.
    pub curve_samples: usize,
    pub seed: u64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            a1_threshold: 1e-6,
            a2_threshold: 1e-6,
            a3_threshold: 1e-6,
            max_points: 400,
            max_seeds: 2000,
            curve_samples: 17,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharSample {
    pub points: Vec<PhasePoint>,
    pub attempted: usize,
    pub succeeded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub verdict: Verdict,
    pub threshold: f64,
    pub min_grad_xi: Option<f64>,
    pub witness: Option<PhasePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    pub verdict: Verdict,
    pub threshold: f64,
    /// +1 positive definite, −1 negative definite, 0 indefinite or mixed.
    pub sign: i8,
    pub min_abs_eigenvalue: Option<f64>,
    pub witness: Option<PhasePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub point: PhasePoint,
    pub rdot: f64,
    pub rddot: f64,
    /// `r̈ / |dr|`, the quantity the threshold is applied to.
    pub rddot_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A3Report {
    pub verdict: Verdict,
    pub threshold: f64,
    pub tangencies_found: usize,
    pub min_abs_rddot: Option<f64>,
    pub min_abs_rddot_normalized: Option<f64>,
    pub witness: Option<Tangency>,
    /// A bounded, deterministic selection of tangencies.
    pub tangencies: Vec<Tangency>,
    pub surface_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub n: usize,
    pub symbol: String,
    pub hypersurface: String,
    pub characteristic_attempted: usize,
    pub characteristic_found: usize,
    pub a1: A1Report,
    pub a2: A2Report,
    pub a3: A3Report,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

/// One Newton step family: move `z` (restricted to `mask` slots) onto the
/// common zero set of `fs` with minimum-norm corrections.
pub(crate) fn project(
    fs: &[&PhaseFn],
    z0: &[f64],
    mask: &[bool],
    tol: f64,
    max_iter: usize,
) -> Result<Option<Vec<f64>>> {
    let d = z0.len();
    let m = fs.len();
    let mut z = z0.to_vec();
    for _ in 0..=max_iter {
        let pt = PhasePoint::from_concat(&z);
        let mut jm = DMatrix::<f64>::zeros(m, d);
        let mut f = DVector::<f64>::zeros(m);
        for (r, g) in fs.iter().enumerate() {
            let j = match g.jet(&pt, 1) {
                Ok(j) => j,
                Err(QmlError::Domain(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            f[r] = j.value;
            for c in 0..d {
                if mask[c] {
                    jm[(r, c)] = j.d1(c);
                }
            }
        }
        if f.amax() <= tol {
            return Ok(Some(z));
        }
        let gram = &jm * jm.transpose();
        let Some(chol) = gram.cholesky() else {
            return Ok(None);
        };
        let step = jm.transpose() * chol.solve(&f);
        for c in 0..d {
            z[c] -= step[c];
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
    }
    Ok(None)
}

fn xi_mask(n: usize) -> Vec<bool> {
    (0..2 * n).map(|i| i >= n).collect()
}

/// Evenly spaced subset of at most `k` items, preserving order.
fn thin<T: Clone>(v: Vec<T>, k: usize) -> Vec<T> {
    if v.len() <= k {
        return v;
    }
    (0..k).map(|i| v[i * v.len() / k].clone()).collect()
}

pub fn sample_char_variety(p: &SymbolFn, region: &Region, opts: &GeometryOptions) -> Result<CharSample> {
    region.validate(p.n)?;
    if opts.max_points == 0 {
        return Err(QmlError::InvalidArgument("N must be at least 1".into()));
    }
    let pf = PhaseFn::from(p.clone());
    let mask = xi_mask(p.n);
    let seeds = region.seeds(opts.max_seeds, opts.seed);
    let mut pts = Vec::new();
    for s in &seeds {
        if let Some(z) = project(&[&pf], s, &mask, 1e-13, 50)? {
            if region.contains(&z, 1e-12) && p.value(&PhasePoint::from_concat(&z))?.abs() <= CHAR_TOL {
                pts.push(PhasePoint::from_concat(&z));
            }
        }
    }
    let succeeded = pts.len();
    Ok(CharSample {
        points: thin(pts, opts.max_points),
        attempted: seeds.len(),
        succeeded,
    })
}

fn grad_xi_norm(p: &SymbolFn, pt: &PhasePoint) -> Result<f64> {
    let j = eval_jet(p, pt, 1)?;
    Ok(j.gradient[p.n..].iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn check_a1(p: &SymbolFn, pts: &[PhasePoint], threshold: f64) -> Result<A1Report> {
    let mut best: Option<(f64, &PhasePoint)> = None;
    for pt in pts {
        let g = grad_xi_norm(p, pt)?;
        if best.map_or(true, |(b, _)| g < b) {
            best = Some((g, pt));
        }
    }
    Ok(match best {
        None => A1Report {
            verdict: Verdict::Vacuous,
            threshold,
            min_grad_xi: None,
            witness: None,
        },
        Some((g, pt)) => A1Report {
            verdict: if g > threshold { Verdict::Pass } else { Verdict::Fail },
            threshold,
            min_grad_xi: Some(g),
            witness: Some(pt.clone()),
        },
    })
}

/// Second fundamental form of the fibre `{ξ : p(x, ξ) = 0}` at `pt`, on an
/// orthonormal basis of `∂_ξ p^⊥`, with normal `∂_ξ p / |∂_ξ p|`.
pub fn second_fundamental_form(p: &SymbolFn, pt: &PhasePoint) -> Result<DMatrix<f64>> {
    let n = p.n;
    let j = eval_jet(p, pt, 2)?;
    let g = DVector::from_iterator(n, (0..n).map(|i| j.d1(n + i)));
    let gn = g.norm();
    if gn == 0.0 {
        return Err(QmlError::Domain("∂_ξ p vanishes".into()));
    }
    let hxx = DMatrix::from_fn(n, n, |a, b| j.d2(n + a, n + b));
    let basis = complement_basis(&(g / gn));
    Ok(-(basis.transpose() * hxx * &basis) / gn)
}

// Columns 2..n of the Householder reflector sending u to ±e1.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut v = u.clone();
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv = v.dot(&v);
    let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, n - 1).into_owned()
}

pub fn check_a2(p: &SymbolFn, pts: &[PhasePoint], threshold: f64) -> Result<A2Report> {
    if pts.is_empty() {
        return Ok(A2Report {
            verdict: Verdict::Vacuous,
            threshold,
            sign: 0,
            min_abs_eigenvalue: None,
            witness: None,
            reason: None,
        });
    }
    let mut sign = 0i8;
    let mut mixed = false;
    let mut worst: Option<(f64, &PhasePoint)> = None;
    let mut reason = None;
    for pt in pts {
        let ii = second_fundamental_form(p, pt)?;
        let eig = SymmetricEigen::new(ii).eigenvalues;
        let min_abs = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let here = if eig.iter().all(|&v| v > 0.0) {
            1
        } else if eig.iter().all(|&v| v < 0.0) {
            -1
        } else {
            0
        };
        if here == 0 {
            if !mixed {
                reason = Some("indefinite or degenerate second fundamental form".to_string());
            }
            mixed = true;
        } else if sign == 0 && !mixed {
            sign = here;
        } else if here != sign {
            if !mixed {
                reason = Some("definiteness sign changes across the sample".to_string());
            }
            mixed = true;
        }
        // an indefinite point is always the worst witness
        let score = if here == 0 { -1.0 } else { min_abs };
        if worst.map_or(true, |(b, _)| score < b) {
            worst = Some((score, pt));
        }
    }
    let (score, wpt) = worst.unwrap();
    let min_abs = score.max(0.0);
    let pass = !mixed && min_abs > threshold;
    if !mixed && !pass {
        reason = Some(format!("min |eigenvalue| {:e} not above threshold", min_abs));
    }
    Ok(A2Report {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        threshold,
        sign: if mixed { 0 } else { sign },
        min_abs_eigenvalue: Some(min_abs),
        witness: Some(wpt.clone()),
        reason,
    })
}

fn grad_x_norm(r: &SymbolFn, pt: &PhasePoint) -> Result<f64> {
    let j = eval_jet(r, pt, 1)?;
    Ok(j.gradient[..r.n].iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn check_a3(p: &SymbolFn, r: &SymbolFn, region: &Region, opts: &GeometryOptions) -> Result<A3Report> {
    let n = p.n;
    if r.n != n {
        return Err(QmlError::Dimension(format!(
            "symbol n = {}, defining function n = {}",
            n, r.n
        )));
    }
    if r.arity != Arity::BaseSpace {
        return Err(QmlError::InvalidDefiningFunction("r must depend on x only".into()));
    }
    region.validate(n)?;
    let pf = PhaseFn::from(p.clone());
    let rf = PhaseFn::from(r.clone());
    let rdot = poisson_bracket(p.clone(), r.clone())?;
    let all = vec![true; 2 * n];
    let on_surface = |z: &[f64]| project(&[&pf, &rf], z, &all, 1e-13, 50);

    // r̈ and |dr| for a candidate; also rejects degenerate defining functions
    let classify = |z: &[f64]| -> Result<Option<Tangency>> {
        let Some(z) = project(&[&pf, &rf, &rdot], z, &all, 1e-14, 30)? else {
            return Ok(None);
        };
        if !region.contains(&z, 1e-9) {
            return Ok(None);
        }
        let pt = PhasePoint::from_concat(&z);
        let dr = grad_x_norm(r, &pt)?;
        if dr < 1e-8 {
            return Err(QmlError::InvalidDefiningFunction(format!("dr = 0 at x = {:?}", pt.x)));
        }
        let (rd, rdd) = crate::flow::r_derivatives(p, r, &pt)?;
        Ok(Some(Tangency {
            point: pt,
            rdot: rd,
            rddot: rdd,
            rddot_normalized: rdd / dr,
        }))
    };

    let seeds = region.seeds(opts.max_seeds, opts.seed);
    let mut surface = Vec::new();
    for s in &seeds {
        if let Some(z) = on_surface(s)? {
            if region.contains(&z, 1e-9) {
                surface.push(z);
            }
        }
    }
    for z in &surface {
        let pt = PhasePoint::from_concat(z);
        if grad_x_norm(r, &pt)? < 1e-8 {
            return Err(QmlError::InvalidDefiningFunction(format!("dr = 0 at x = {:?}", pt.x)));
        }
    }
    let surface = thin(surface, opts.max_points);

    let rdot_norm = |z: &[f64]| -> Result<f64> {
        let pt = PhasePoint::from_concat(z);
        Ok(rdot.value(&pt)? / grad_x_norm(r, &pt)?)
    };

    let mut found: Vec<Tangency> = Vec::new();
    let bounds = region.xi.clone();
    let m = opts.curve_samples.max(3);
    for z in &surface {
        if rdot_norm(z)?.abs() < 1e-8 {
            if let Some(t) = classify(z)? {
                found.push(t);
            }
        }
        // curves: sweep one fibre coordinate across the box, reprojecting
        for k in 0..n {
            let (lo, hi) = bounds[k];
            let at = |sig: f64| -> Result<Option<Vec<f64>>> {
                let mut w = z.clone();
                w[n + k] = sig;
                on_surface(&w)
            };
            let mut prev: Option<(f64, Vec<f64>, f64)> = None;
            for i in 0..m {
                let sig = lo + (hi - lo) * i as f64 / (m - 1) as f64;
                let Some(w) = at(sig)? else {
                    prev = None;
                    continue;
                };
                let v = rdot_norm(&w)?;
                if v == 0.0 {
                    // a sample sitting exactly on the tangency brackets nothing
                    if let Some(t) = classify(&w)? {
                        found.push(t);
                    }
                }
                if let Some((s0, w0, v0)) = &prev {
                    if v0.signum() != v.signum() && *v0 != 0.0 && v != 0.0 {
                        let (mut a, mut va, mut b) = (*s0, *v0, sig);
                        let mut best = if v0.abs() < v.abs() { w0.clone() } else { w.clone() };
                        for _ in 0..40 {
                            let mid = 0.5 * (a + b);
                            let Some(wm) = at(mid)? else { break };
                            let vm = rdot_norm(&wm)?;
                            best = wm;
                            if vm == 0.0 {
                                break;
                            }
                            if vm.signum() == va.signum() {
                                a = mid;
                                va = vm;
                            } else {
                                b = mid;
                            }
                        }
                        if let Some(t) = classify(&best)? {
                            found.push(t);
                        }
                    }
                }
                prev = Some((sig, w, v));
            }
        }
    }

    found.sort_by(|a, b| {
        a.rddot_normalized
            .abs()
            .partial_cmp(&b.rddot_normalized.abs())
            .unwrap()
            .then_with(|| a.point.concat().partial_cmp(&b.point.concat()).unwrap())
    });
    let count = found.len();
    let report = match found.first() {
        None => A3Report {
            verdict: Verdict::Vacuous,
            threshold: opts.a3_threshold,
            tangencies_found: 0,
            min_abs_rddot: None,
            min_abs_rddot_normalized: None,
            witness: None,
            tangencies: Vec::new(),
            surface_points: surface.len(),
        },
        Some(w) => {
            let min_raw = found.iter().map(|t| t.rddot.abs()).fold(f64::INFINITY, f64::min);
            let min_norm = w.rddot_normalized.abs();
            A3Report {
                verdict: if min_norm > opts.a3_threshold {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                threshold: opts.a3_threshold,
                tangencies_found: count,
                min_abs_rddot: Some(min_raw),
                min_abs_rddot_normalized: Some(min_norm),
                witness: Some(w.clone()),
                tangencies: thin(found.clone(), 32),
                surface_points: surface.len(),
            }
        }
    };
    Ok(report)
}

/// Full A1–A3 check on a region.
pub fn check_geometry(p: &SymbolFn, r: &SymbolFn, region: &Region, opts: &GeometryOptions) -> Result<GeometryReport> {
    let cs = sample_char_variety(p, region, opts)?;
    let a1 = check_a1(p, &cs.points, opts.a1_threshold)?;
    let a2 = if a1.verdict == Verdict::Pass {
        check_a2(p, &cs.points, opts.a2_threshold)?
    } else {
        A2Report {
            verdict: if a1.verdict == Verdict::Vacuous {
                Verdict::Vacuous
            } else {
                Verdict::Fail
            },
            threshold: opts.a2_threshold,
            sign: 0,
            min_abs_eigenvalue: None,
            witness: a1.witness.clone(),
            reason: Some("A1 did not pass".into()),
        }
    };
    let a3 = check_a3(p, r, region, opts)?;
    let mut failures = Vec::new();
    for (name, v) in [("A1", a1.verdict), ("A2", a2.verdict), ("A3", a3.verdict)] {
        match v {
            Verdict::Fail => failures.push(format!("{} failed", name)),
            Verdict::Vacuous => failures.push(format!("{} vacuous: nothing sampled", name)),
            Verdict::Pass => {}
        }
    }
    Ok(GeometryReport {
        n: p.n,
        symbol: p.to_string(),
        hypersurface: r.to_string(),
        characteristic_attempted: cs.attempted,
        characteristic_found: cs.succeeded,
        passed: failures.is_empty(),
        a1,
        a2,
        a3,
        failures,
    })
}
