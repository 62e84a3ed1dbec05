//! Exact inference and bound certification for coupled pairs of
//! finite-alphabet stochastic chains.
//!
//! A stationary pair chain `Z_n = (X_n, Y_n)` of finite order is described
//! by a [`CoupledKernel`]. The [`engine`] computes exact cylinder and
//! conditional probabilities under partial observations, [`quantities`]
//! derives the blurring coefficient, the non-nullness constant, the
//! oscillations `β_{j,k}` and their partial sums, [`verify`] checks the
//! comparison inequalities between the two marginal chains exhaustively,
//! and [`simulate`] provides a Monte Carlo cross-check.
//!
//! The model layer, the engine and the quantities are generic over the
//! scalar type ([`Real`], implemented for `f32` and `f64`); the aliases
//! below fix it to `f64`, which is what the verifier and simulator use.

pub mod engine;
pub mod error;
pub mod json;
pub mod model;
pub mod quantities;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CoupledKernel = model::CoupledKernel<f64>;
pub type StationaryLaw = model::StationaryLaw<f64>;
pub type Model = model::Model<f64>;
pub type ConditionalLaw = engine::ConditionalLaw<f64>;
