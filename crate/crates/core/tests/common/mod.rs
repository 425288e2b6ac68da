//! Property checks shared by the property suite and the acceptance run.
//! Each returns the worst error it saw so callers can print or assert.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qml_core::eikonal::{hj_residual, solve_phase, uniform_axis, PhaseGrid, ReducedSymbol, SolveOptions};
use qml_core::osc::grid::{semiclassical_ft, Axis, Direction, GridFn};
use qml_core::osc::operator::{
    build_osc_operator, operator_norm, resolved_axes, Bump, DenseOperator, LinearOperator, OscPhase, PowerOptions,
    StructuredOperator, DEFAULT_POINTS_PER_PERIOD,
};
use qml_core::symbol::{builtin_symbol, eval_jet, parse_symbol, poisson_bracket, PhaseFn, PhasePoint, SymbolFn};

pub const SMOOTH_SYMBOLS: [(&str, usize); 4] = [
    ("x1*xi2^2 + sin(x2)*xi1 - exp(x1*xi1/3)", 2),
    ("sqrt(1 + x1^2 + xi2^2)*cos(xi1) - log(2 + x2^2)", 2),
    ("(x1 - xi2)^3/(1 + xi1^2) + x2*xi2", 2),
    ("xi1 - x3 - xi2^2 - xi3^2 + sin(x1*x2)*xi3/4", 3),
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, n: usize, half: f64) -> PhasePoint {
    let mut v = || r.gen_range(-half..half);
    let x = (0..n).map(|_| v()).collect();
    let xi = (0..n).map(|_| v()).collect();
    PhasePoint::new(x, xi)
}

fn shifted(pt: &PhasePoint, i: usize, d: f64) -> PhasePoint {
    let mut z = pt.concat();
    z[i] += d;
    PhasePoint::from_concat(&z)
}

/// Richardson-extrapolated central difference of `g` along slot `i`.
fn richardson(pt: &PhasePoint, i: usize, step: f64, g: &dyn Fn(&PhasePoint) -> Vec<f64>) -> Vec<f64> {
    let central = |h: f64| -> Vec<f64> {
        let (a, b) = (g(&shifted(pt, i, h)), g(&shifted(pt, i, -h)));
        a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect()
    };
    let (c1, c2) = (central(step), central(step / 2.0));
    c1.iter().zip(&c2).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Worst relative error of the exact jets against finite differences of the
/// next lower order, which bottoms out at the value.
pub fn jet_vs_fd(points_per_symbol: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for (text, n) in SMOOTH_SYMBOLS {
        let f = parse_symbol(text, n).unwrap();
        let d = 2 * n;
        for _ in 0..points_per_symbol {
            let pt = random_point(&mut r, n, 0.8);
            let j = eval_jet(&f, &pt, 3).unwrap();
            let value = |q: &PhasePoint| vec![f.value(q).unwrap()];
            let grad = |q: &PhasePoint| eval_jet(&f, q, 1).unwrap().gradient;
            let hess = |q: &PhasePoint| eval_jet(&f, q, 2).unwrap().hessian;
            for i in 0..d {
                let g = richardson(&pt, i, 1e-3, &value);
                worst = worst.max(rel(j.d1(i), g[0]));
                let h = richardson(&pt, i, 1e-3, &grad);
                for k in 0..d {
                    worst = worst.max(rel(j.d2(i, k), h[k]));
                }
                let t = richardson(&pt, i, 1e-3, &hess);
                for a in 0..d {
                    for b in 0..d {
                        worst = worst.max(rel(j.d3(i, a, b), t[a * d + b]));
                    }
                }
            }
        }
    }
    worst
}

/// Antisymmetry, Jacobi, Leibniz and the canonical relations, as the worst
/// residual scaled by the size of the terms involved.
pub fn bracket_algebra(points: usize, seed: u64) -> f64 {
    let n = 2;
    let fs: Vec<SymbolFn> = [
        "x1*xi2^2 + sin(x2)*xi1",
        "exp(x1/2)*xi1 - x2^2*xi2",
        "cos(xi1 + x2) + x1*x2*xi2",
    ]
    .iter()
    .map(|t| parse_symbol(t, n).unwrap())
    .collect();
    let b = |f: PhaseFn, g: PhaseFn| poisson_bracket(f, g).unwrap();
    let s = |i: usize| PhaseFn::Symbol(fs[i].clone());
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut record = |terms: &[f64]| {
        let sum: f64 = terms.iter().sum();
        let scale = terms.iter().map(|t| t.abs()).fold(1.0, f64::max);
        worst = worst.max(sum.abs() / scale);
    };
    let gk = fs[1].mul(&fs[2]).unwrap();
    for _ in 0..points {
        let pt = random_point(&mut r, n, 0.9);
        let v = |g: &PhaseFn| g.value(&pt).unwrap();
        record(&[v(&b(s(0), s(1))), v(&b(s(1), s(0)))]);
        record(&[
            v(&b(s(0), b(s(1), s(2)))),
            v(&b(s(1), b(s(2), s(0)))),
            v(&b(s(2), b(s(0), s(1)))),
        ]);
        let (g, k) = (v(&s(1)), v(&s(2)));
        record(&[
            v(&b(s(0), PhaseFn::Symbol(gk.clone()))),
            -v(&b(s(0), s(1))) * k,
            -g * v(&b(s(0), s(2))),
        ]);
        for i in 1..=n {
            for j in 1..=n {
                let xi = parse_symbol(&format!("xi{}", i), n).unwrap();
                let x = parse_symbol(&format!("x{}", j), n).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                record(&[v(&b(xi.into(), x.into())), -want]);
            }
        }
    }
    worst
}

fn random_grid(r: &mut ChaCha8Rng, axes: Vec<Axis>) -> GridFn {
    let len: usize = axes.iter().map(|a| a.len).product();
    let values = (0..len)
        .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .collect();
    GridFn::new(axes, values).unwrap()
}

/// (unitarity error, round-trip error, error against a direct sum), each
/// relative to the input norm.
pub fn fourier_checks(seed: u64) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let h = 0.05;
    let f = random_grid(
        &mut r,
        vec![Axis::physical(-1.3, 0.07, 37), Axis::physical(-0.6, 0.05, 24)],
    );
    let g = semiclassical_ft(&f, h, Direction::Forward, None).unwrap();
    let back = semiclassical_ft(&g, h, Direction::Inverse, None).unwrap();
    let n0 = f.norm_l2();
    let unitarity = (g.norm_l2() - n0).abs() / n0;
    let rt = f
        .values
        .iter()
        .zip(&back.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        * f.cell_volume().sqrt()
        / n0;
    let mut grid_ok = 0.0f64;
    for (a, b) in f.axes.iter().zip(&back.axes) {
        grid_ok = grid_ok
            .max((a.origin - b.origin).abs())
            .max((a.spacing - b.spacing).abs());
    }

    let one = random_grid(&mut r, vec![Axis::physical(-0.4, 0.05, 17)]);
    let hat = semiclassical_ft(&one, h, Direction::Forward, None).unwrap();
    let (xa, ka) = (&one.axes[0], &hat.axes[0]);
    let mut direct_err = 0.0f64;
    for k in 0..ka.len {
        let xi = ka.point(k);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..xa.len {
            acc += Complex64::from_polar(1.0, -xa.point(j) * xi / h) * one.values[j];
        }
        acc *= xa.spacing / (2.0 * std::f64::consts::PI * h).sqrt();
        direct_err = direct_err.max((acc - hat.values[k]).norm());
    }
    (unitarity, rt.max(grid_ok), direct_err / one.norm_l2())
}

/// Worst HJ residual over the model phases and one non-model symbol.
pub fn hj_residuals() -> f64 {
    let model2 = ReducedSymbol::Implicit {
        p: builtin_symbol("model-fold", 2).unwrap(),
        tau_seed: 0.0,
    };
    let model3 = ReducedSymbol::Implicit {
        p: builtin_symbol("model-fold", 3).unwrap(),
        tau_seed: 0.0,
    };
    let other = ReducedSymbol::explicit(parse_symbol("xi2^2 + x1*x2 + sin(x2)*xi2/4", 2).unwrap()).unwrap();
    let opts = SolveOptions::default();
    let g2 = PhaseGrid {
        t: uniform_axis(-0.4, 0.4, 33),
        xbar: vec![uniform_axis(-0.4, 0.4, 33)],
    };
    let g3 = PhaseGrid {
        t: uniform_axis(-0.3, 0.3, 7),
        xbar: vec![uniform_axis(-0.2, 0.2, 5), uniform_axis(-0.2, 0.2, 5)],
    };
    let mut worst = 0.0f64;
    for (a, params, grid) in [
        (&model2, vec![vec![-0.3], vec![0.0], vec![0.25]], &g2),
        (&other, vec![vec![-0.2], vec![0.3]], &g2),
        (&model3, vec![vec![0.1, -0.2]], &g3),
    ] {
        let tab = solve_phase(a, &params, 0.0, grid, &opts).unwrap();
        assert_eq!(tab.flagged, 0, "caustic in a residual test grid");
        let rep = hj_residual(a, &tab).unwrap();
        assert!(rep.checked_nodes > 0);
        worst = worst.max(rep.max_residual);
    }
    worst
}

fn largest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Worst relative error of the norm estimate against a dense SVD, over random
/// matrices and discretised oscillatory operators.
pub fn operator_norm_vs_svd(seed: u64) -> f64 {
    let mut r = rng(seed);
    let opts = PowerOptions {
        seed,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut compare = |op: &dyn LinearOperator, m: &DMatrix<Complex64>| {
        let want = largest_singular_value(m);
        let got = operator_norm(op, &opts).unwrap().sigma;
        worst = worst.max((got - want).abs() / want);
    };
    for (rows, cols) in [(64, 64), (48, 80), (96, 33)] {
        let data = (0..rows * cols)
            .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
            .collect();
        let op = DenseOperator::new(rows, cols, data).unwrap();
        compare(&op, &op.to_nalgebra());
    }
    let amp = Bump::square(0.8);
    for (text, lambda) in [("x1^2*x2 + sin(x1*x2)", 20.0), ("-x1*x2", 100.0)] {
        let phase = OscPhase::parse(text).unwrap();
        let (xa, ya) = resolved_axes(&phase, &amp, lambda, DEFAULT_POINTS_PER_PERIOD, 64).unwrap();
        let op = build_osc_operator(&phase, &amp, lambda, &xa, &ya, DEFAULT_POINTS_PER_PERIOD).unwrap();
        assert!(op.rows <= 512 && op.cols <= 512);
        compare(&op, &op.to_nalgebra());
    }
    for (text, lambda) in [("(x1 - x2)^3/3", 16.0), ("((x1 + x2)^3 - x2^3)/3", 14.0)] {
        let phase = OscPhase::parse(text).unwrap();
        let (xa, ya) = resolved_axes(&phase, &amp, lambda, DEFAULT_POINTS_PER_PERIOD, 64).unwrap();
        let dense = build_osc_operator(&phase, &amp, lambda, &xa, &ya, DEFAULT_POINTS_PER_PERIOD).unwrap();
        let st = StructuredOperator::try_build(&phase, &amp, lambda, &xa, &ya, DEFAULT_POINTS_PER_PERIOD, seed)
            .unwrap()
            .expect("phase should split");
        assert!(dense.rows <= 512 && dense.cols <= 512);
        compare(&st, &dense.to_nalgebra());
    }
    worst
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub const MODEL_CONFIG: &str = r#"{
  "dimension": 2,
  "symbol": "model-fold",
  "hypersurface": "x2",
  "base_point": {"x": [0, 0], "xi": [0, 0]},
  "region": {"x": [[-0.5, 0.5], [-0.5, 0.5]], "xi": [[-0.5, 0.5], [-0.5, 0.5]], "samples": 5},
  "opnorm": {"phase": "(x1 - x2)^3/3", "lambdas": [16, 32, 64, 128]},
  "quasimode": {"hs": [0.03125, 0.015625, 0.0078125, 0.00390625]}
}"#;

/// Run the binary and return (exit code, stdout).
pub fn run_qml(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qml")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Run every subcommand twice with the same seed (different worker counts)
/// and list the outputs that differ.
pub fn cli_determinism() -> Vec<String> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "model.json", MODEL_CONFIG);
    let cfg = cfg.to_str().unwrap();
    let mut diffs = Vec::new();
    for cmd in ["check", "flow", "fold", "opnorm", "quasimode", "table"] {
        let a = tmp.path().join(format!("{}-a", cmd));
        let b = tmp.path().join(format!("{}-b", cmd));
        let (ca, _) = run_qml(&[
            cmd,
            "--config",
            cfg,
            "--out",
            a.to_str().unwrap(),
            "--seed",
            "7",
            "--jobs",
            "1",
        ]);
        let (cb, _) = run_qml(&[
            cmd,
            "--config",
            cfg,
            "--out",
            b.to_str().unwrap(),
            "--seed",
            "7",
            "--jobs",
            "3",
        ]);
        if ca != cb {
            diffs.push(format!("{}: exit codes {} and {}", cmd, ca, cb));
        }
        let (fa, fb) = (dir_contents(&a), dir_contents(&b));
        if fa.is_empty() {
            diffs.push(format!("{}: no output files", cmd));
        }
        if fa != fb {
            diffs.push(format!("{}: outputs differ", cmd));
        }
    }
    diffs
}
