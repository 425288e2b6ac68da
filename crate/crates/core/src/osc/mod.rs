//! Semiclassical Fourier transforms, discretised oscillatory integral
//! operators, their norms and log-log scaling fits.

pub mod fit;
pub mod grid;
pub mod operator;
pub mod sweep;

pub use fit::{scaling_fit, ScalingFit};
pub use grid::{semiclassical_ft, Axis, AxisKind, Direction, GridFn};
pub use operator::{
    build_osc_operator, operator_norm, Bump, DenseOperator, LinearOperator, NormEstimate, OscPhase, PowerOptions,
    StructuredOperator,
};
pub use sweep::{lambda_sweep, osc_norm, z_phase, z_sweep, OperatorMethod, OscSettings, SweepRow};
