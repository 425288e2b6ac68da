//! JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eikonal::{FoldOptions, ReducedSymbol};
use crate::error::{QmlError, Result};
use crate::geometry::{GeometryOptions, Region};
use crate::osc::sweep::OscSettings;
use crate::quasimode::{pexp, QuasimodeSettings};
use crate::symbol::{builtin_symbol, parse_symbol, Arity, Builtin, PhasePoint, SymbolFn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: Option<usize>,
    /// Expression in `x1..xn, xi1..xin`, or a builtin name.
    pub symbol: Option<String>,
    /// Defining function `r(x)` of the hypersurface.
    pub hypersurface: Option<String>,
    /// Optional explicit reduced symbol `a(x, xi2..xin)` for `fold`.
    pub reduced_symbol: Option<String>,
    pub base_point: Option<BasePoint>,
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub check: GeometryOptions,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub fold: FoldOptions,
    #[serde(default)]
    pub opnorm: OpnormConfig,
    #[serde(default)]
    pub quasimode: QuasimodeConfig,
    #[serde(default)]
    pub table: TableConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x: Vec<(f64, f64)>,
    pub xi: Vec<(f64, f64)>,
    pub samples: Samples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub span: (f64, f64),
    pub samples: usize,
    pub tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            span: (-1.0, 1.0),
            samples: 201,
            tol: crate::flow::DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Fixed phase, `λ` ladder.
    Lambda,
    /// `Z` operator from the solved phase of the symbol, `h` ladder.
    Z,
}

pub fn default_lambdas() -> Vec<f64> {
    (6..=13).map(|e| 2f64.powi(e)).collect()
}

pub fn default_hs() -> Vec<f64> {
    (5..=12).map(|e| 2f64.powi(-e)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpnormConfig {
    pub mode: SweepMode,
    /// Phase `ψ(x1, x2)` for the λ sweep.
    pub phase: Option<String>,
    /// Bump width `w`: the amplitude is `χ(|x|/w) χ(|y|/w)`.
    pub width: f64,
    pub lambdas: Vec<f64>,
    pub hs: Vec<f64>,
    pub target: Option<f64>,
    pub margin: Option<f64>,
    /// Chebyshev nodes per axis for the tabulated `Z` phase.
    pub cheb_nodes: usize,
    pub solver: OscSettings,
}

impl Default for OpnormConfig {
    fn default() -> Self {
        OpnormConfig {
            mode: SweepMode::Lambda,
            phase: None,
            width: 0.8,
            lambdas: default_lambdas(),
            hs: default_hs(),
            target: None,
            margin: None,
            cheb_nodes: 20,
            solver: OscSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasimodeConfig {
    pub n: usize,
    #[serde(with = "pexp::list")]
    pub p: Vec<f64>,
    pub hs: Vec<f64>,
    pub margin: f64,
    #[serde(flatten)]
    pub settings: QuasimodeSettings,
}

impl Default for QuasimodeConfig {
    fn default() -> Self {
        QuasimodeConfig {
            n: 2,
            p: vec![2.0, 4.0],
            hs: default_hs(),
            margin: 0.05,
            settings: QuasimodeSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub n: Vec<usize>,
    #[serde(with = "pexp::list")]
    pub p: Vec<f64>,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            n: vec![2],
            p: vec![2.0, 4.0, f64::INFINITY],
        }
    }
}

/// Tolerance on `|p|` at a base point used for fold or geometry analysis.
pub const BASE_POINT_TOL: f64 = 1e-8;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QmlError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        Ok(serde_json::from_str(text)?)
    }

    fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| QmlError::Config(format!("missing field `{}`", what)))
    }

    pub fn dim(&self) -> Result<usize> {
        let n = *Self::require(&self.dimension, "dimension")?;
        if n < 2 {
            return Err(QmlError::Config(format!("dimension must be at least 2, got {}", n)));
        }
        Ok(n)
    }

    pub fn symbol_fn(&self) -> Result<SymbolFn> {
        let n = self.dim()?;
        let text = Self::require(&self.symbol, "symbol")?;
        let p = if Builtin::from_name(text.trim()).is_ok() {
            builtin_symbol(text.trim(), n)?
        } else {
            parse_symbol(text, n)?
        };
        Ok(p)
    }

    pub fn hypersurface_fn(&self) -> Result<SymbolFn> {
        let n = self.dim()?;
        let r = parse_symbol(Self::require(&self.hypersurface, "hypersurface")?, n)?;
        if r.arity != Arity::BaseSpace {
            return Err(QmlError::Config("the hypersurface may depend on x only".into()));
        }
        Ok(r)
    }

    pub fn base(&self) -> Result<PhasePoint> {
        let n = self.dim()?;
        let b = Self::require(&self.base_point, "base_point")?;
        if b.x.len() != n || b.xi.len() != n {
            return Err(QmlError::Config(format!(
                "base_point needs x and xi of length {}, got {} and {}",
                n,
                b.x.len(),
                b.xi.len()
            )));
        }
        Ok(PhasePoint::new(b.x.clone(), b.xi.clone()))
    }

    /// The base point, checked to lie on `p = 0`.
    pub fn characteristic_base(&self, p: &SymbolFn) -> Result<PhasePoint> {
        let b = self.base()?;
        let v = p.value(&b)?;
        if !(v.abs() < BASE_POINT_TOL) {
            return Err(QmlError::Config(format!(
                "|p| = {:e} at the base point; it must be below {:e}",
                v.abs(),
                BASE_POINT_TOL
            )));
        }
        Ok(b)
    }

    pub fn region(&self) -> Result<Region> {
        let n = self.dim()?;
        let rc = Self::require(&self.region, "region")?;
        let samples = match &rc.samples {
            Samples::Uniform(k) => vec![*k; 2 * n],
            Samples::PerAxis(v) => v.clone(),
        };
        let region = Region {
            x: rc.x.clone(),
            xi: rc.xi.clone(),
            samples,
        };
        region.validate(n).map_err(|e| QmlError::Config(e.to_string()))?;
        Ok(region)
    }

    pub fn reduced(&self) -> Result<ReducedSymbol> {
        let n = self.dim()?;
        match &self.reduced_symbol {
            Some(text) => ReducedSymbol::explicit(parse_symbol(text, n)?),
            None => {
                let p = self.symbol_fn()?;
                let tau_seed = self
                    .base_point
                    .as_ref()
                    .map_or(0.0, |b| b.xi.first().copied().unwrap_or(0.0));
                Ok(ReducedSymbol::Implicit { p, tau_seed })
            }
        }
    }
}
