// `!(x < y)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod eikonal;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod ode;
pub mod osc;
pub mod quasimode;
pub mod symbol;

pub use error::{QmlError, Result};
