//! Symbol emergence through the Metropolis-Hastings naming game.
//!
//! - [`stimulus`] and [`color`]: color-patch datasets in CIE-L\*u\*v\*.
//! - [`model`]: the two-agent Gaussian-mixture model and its conjugate updates.
//! - [`engine`]: acceptance rules, the naming-game loop, scripted participants.
//! - [`session`]: the two-participant protocol state machine, wire format and
//!   append-only event log.
//! - [`analysis`]: acceptance inference, the affine-Bernoulli fit, the
//!   randomization test and model-comparison U-tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod color;
pub mod engine;
mod error;
pub mod model;
pub mod rng;
pub mod session;
pub mod stimulus;

pub use error::{Error, Result};
