//! Communication-aware gradient compression.
//!
//! The crate is organised bottom-up:
//!
//! * [`compressors`]: top-T sparsification, sparsification plus sign
//!   quantization, unbiased stochastic sparsification and the bit-exact
//!   wire codec for all of them.
//! * [`costmodel`]: maps a sparsity budget `T` to communication cost under
//!   payload, affine and packet regimes.
//! * [`tuner`]: improvement curves (`alpha`, `beta`, `omega`) and the
//!   per-iteration budget rule that maximizes improvement per unit of cost.
//! * [`problems`]: objectives with exact gradients and smoothness constants.
//! * [`optimizers`]: single-node and simulated multi-node drivers.
//! * [`transport`]: frame format and the deterministic simulated network.
//! * [`metrics`]: empirical profiles and iteration-complexity bounds.
//! * [`cli`]: experiment configuration and the runner behind the binary.

pub mod cli;
pub mod compressors;
pub mod costmodel;
pub mod error;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod transport;
pub mod tuner;

pub use error::{Error, Result};
