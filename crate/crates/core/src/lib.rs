//! Simulation and invariant diagnostics for cross-diffusion parabolic
//! systems with equal diffusion or equal reaction rates.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod models;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use models::{ModelSpec, PsiSpec, State, Variant};
