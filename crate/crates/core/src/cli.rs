//! Batch front end behind the `qml` binary.
//!
//! Every subcommand writes `<command>_report.json` into the output
//! directory (plus CSV data where it has any), even when a check fails.
//! Exit codes: 0 pass, 1 a requested check failed or the analysis could not
//! complete, 2 configuration or schema error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SweepMode};
use crate::eikonal::fold_report;
use crate::error::{QmlError, Result};
use crate::flow::integrate_flow;
use crate::geometry::check_geometry;
use crate::osc::fit::scaling_fit;
use crate::osc::operator::{Bump, OscPhase};
use crate::osc::sweep::{lambda_sweep, write_sweep_csv, z_phase, z_sweep};
use crate::quasimode::{exponents, h_scaling_experiment, pexp, write_quasimode_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Flow,
    Fold,
    Opnorm,
    Quasimode,
    Table,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Flow => "flow",
            Command::Fold => "fold",
            Command::Opnorm => "opnorm",
            Command::Quasimode => "quasimode",
            Command::Table => "table",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    status: &'a str,
    reasons: Vec<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    result: Value,
}

enum Outcome {
    Done {
        passed: bool,
        reasons: Vec<String>,
        result: Value,
    },
    Config(String),
    Failed(String),
}

fn is_config_error(e: &QmlError) -> bool {
    matches!(
        e,
        QmlError::Config(_)
            | QmlError::Syntax { .. }
            | QmlError::Dimension(_)
            | QmlError::UnknownBuiltin(_)
            | QmlError::InvalidArgument(_)
            | QmlError::InsufficientSamples(_)
    )
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| QmlError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Run one subcommand and return the process exit code.
pub fn run(cmd: Command, opts: &RunOptions) -> i32 {
    if let Some(j) = opts.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    if let Err(e) = fs::create_dir_all(&opts.out) {
        eprintln!("error: cannot create {}: {}", opts.out.display(), e);
        return EXIT_CONFIG;
    }
    let outcome = match ExperimentConfig::load(&opts.config) {
        Err(e) => Outcome::Config(e.to_string()),
        Ok(mut cfg) => {
            if let Some(seed) = opts.seed {
                cfg.check.seed = seed;
                cfg.opnorm.solver.power.seed = seed;
            }
            match dispatch(cmd, &cfg, &opts.out) {
                Ok(o) => o,
                Err(e) if is_config_error(&e) => Outcome::Config(e.to_string()),
                Err(e) => Outcome::Failed(e.to_string()),
            }
        }
    };
    let (status, code, reasons, result) = match outcome {
        Outcome::Done {
            passed: true,
            reasons,
            result,
        } => ("pass", EXIT_PASS, reasons, result),
        Outcome::Done {
            passed: false,
            reasons,
            result,
        } => ("fail", EXIT_FAIL, reasons, result),
        Outcome::Config(m) => ("config-error", EXIT_CONFIG, vec![m], Value::Null),
        Outcome::Failed(m) => ("error", EXIT_FAIL, vec![m], Value::Null),
    };
    for r in &reasons {
        eprintln!("{}: {}", cmd.name(), r);
    }
    let env = Envelope {
        command: cmd.name(),
        status,
        reasons,
        result,
    };
    let path = opts.out.join(format!("{}_report.json", cmd.name()));
    if let Err(e) = write_json(&path, &env) {
        eprintln!("error: cannot write {}: {}", path.display(), e);
        return EXIT_FAIL.max(code);
    }
    println!("{}: {}", cmd.name(), status);
    code
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| QmlError::Io(e.to_string()))
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    match cmd {
        Command::Check => {
            let p = cfg.symbol_fn()?;
            let r = cfg.hypersurface_fn()?;
            if cfg.base_point.is_some() {
                cfg.characteristic_base(&p)?;
            }
            let region = cfg.region()?;
            let rep = check_geometry(&p, &r, &region, &cfg.check)?;
            Ok(Outcome::Done {
                passed: rep.passed,
                reasons: rep.failures.clone(),
                result: to_value(&rep)?,
            })
        }
        Command::Flow => {
            let p = cfg.symbol_fn()?;
            let init = cfg.base()?;
            let f = &cfg.flow;
            let traj = integrate_flow(&p, &init, f.span, f.tol, f.samples)?;
            traj.write_csv(BufWriter::new(File::create(out.join("trajectory.csv"))?))?;
            let bound = traj.drift_bound();
            let passed = traj.max_drift <= bound;
            let reasons = if passed {
                vec![]
            } else {
                vec![format!("Hamiltonian drift {:e} exceeds {:e}", traj.max_drift, bound)]
            };
            Ok(Outcome::Done {
                passed,
                reasons,
                result: json!({
                    "n": traj.n,
                    "samples": traj.samples.len(),
                    "tol": traj.tol,
                    "max_drift": traj.max_drift,
                    "drift_bound": bound,
                    "steps_accepted": traj.steps_accepted,
                    "steps_rejected": traj.steps_rejected,
                    "csv": "trajectory.csv",
                }),
            })
        }
        Command::Fold => {
            let a = cfg.reduced()?;
            let p = a.full_symbol()?;
            let base = cfg.characteristic_base(&p)?;
            let r = cfg.hypersurface.as_ref().map(|_| cfg.hypersurface_fn()).transpose()?;
            let rep = fold_report(&a, &base.x, &base.xi[1..], r.as_ref(), &cfg.fold)?;
            let mut reasons = Vec::new();
            if let Some((e1, e2)) = rep.closed_vs_numeric {
                if e1.max(e2) > cfg.fold.numeric_threshold {
                    reasons.push(format!(
                        "numeric third derivatives differ from the closed form by {:e}",
                        e1.max(e2)
                    ));
                }
            }
            if let Some(e) = rep.rddot_relative_error {
                if e > cfg.fold.numeric_threshold {
                    reasons.push(format!("r̈ from the phase disagrees with the flow by {:e}", e));
                }
            }
            Ok(Outcome::Done {
                passed: reasons.is_empty(),
                reasons,
                result: to_value(&rep)?,
            })
        }
        Command::Opnorm => {
            let o = &cfg.opnorm;
            if !(o.width > 0.0) {
                return Err(QmlError::Config("opnorm.width must be positive".into()));
            }
            let amp = Bump::square(o.width);
            let (rows, default_target) = match o.mode {
                SweepMode::Lambda => {
                    let text = o
                        .phase
                        .as_ref()
                        .ok_or_else(|| QmlError::Config("opnorm.phase is required for the λ sweep".into()))?;
                    let phase = OscPhase::parse(text)?;
                    (lambda_sweep(&phase, &amp, &o.lambdas, &o.solver)?, None)
                }
                SweepMode::Z => {
                    let a = cfg.reduced()?;
                    let phase = z_phase(&a, o.width, o.cheb_nodes, &Default::default())?;
                    (z_sweep(&phase, &amp, &o.hs, &o.solver)?, Some(-1.0 / 6.0))
                }
            };
            write_sweep_csv(&rows, BufWriter::new(File::create(out.join("sweep.csv"))?))?;
            let target = o.target.or(default_target);
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.param, r.norm)).collect();
            let fit = scaling_fit(&samples, target, o.margin.or(target.map(|_| 0.04)))?;
            let mut reasons = Vec::new();
            if fit.pass == Some(false) {
                reasons.push(format!(
                    "fitted slope {:.4} misses target {:.4} ± {}",
                    fit.slope,
                    fit.target.unwrap_or(f64::NAN),
                    fit.margin.unwrap_or(f64::NAN)
                ));
            }
            Ok(Outcome::Done {
                passed: reasons.is_empty(),
                reasons,
                result: json!({ "mode": o.mode, "rows": rows, "fit": fit, "csv": "sweep.csv" }),
            })
        }
        Command::Quasimode => {
            let q = &cfg.quasimode;
            let exp = h_scaling_experiment(q.n, &q.p, &q.hs, q.margin, &q.settings)?;
            write_quasimode_csv(&exp.rows, BufWriter::new(File::create(out.join("quasimode.csv"))?))?;
            Ok(Outcome::Done {
                passed: exp.passed,
                reasons: exp.failures.clone(),
                result: to_value(&exp)?,
            })
        }
        Command::Table => {
            let t = &cfg.table;
            if t.n.is_empty() || t.p.is_empty() {
                return Err(QmlError::Config("table needs at least one n and one p".into()));
            }
            let mut rows = Vec::new();
            for &n in &t.n {
                for &p in &t.p {
                    rows.push(exponents(n, p)?);
                }
            }
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.join("exponents.csv"))?));
            w.write_record(["n", "p", "delta", "delta_tilde"])?;
            for e in &rows {
                w.write_record([
                    e.n.to_string(),
                    pexp::label(e.p),
                    format!("{}", e.delta),
                    e.delta_tilde.map_or_else(|| "-".to_string(), |d| format!("{}", d)),
                ])?;
            }
            w.flush()?;
            Ok(Outcome::Done {
                passed: true,
                reasons: vec![],
                result: json!({ "rows": rows, "csv": "exponents.csv" }),
            })
        }
    }
}
