//! Core library for sigmoid-gated Hawkes process (SGHP) modeling.
//!
//! The crate covers the full modeling loop for multivariate event sequences:
//!
//! - [`data`]: event/sequence/dataset types, validation, and seeded splitting.
//! - [`hawkes`]: ground-truth Hawkes specifications, Ogata-thinning simulation,
//!   and compensator-based goodness-of-fit.
//! - [`tape`] / [`adam`]: a small reverse-mode differentiation tape over scalars
//!   and dense arrays, plus the Adam optimizer driving it.
//! - [`model`]: the SGHP encoder-decoder built on the tape — type/temporal
//!   embeddings, the sigmoid-gated rational-quadratic triggering kernel,
//!   per-pair kernel parameter heads, and the stochastic next-event decoders.
//! - [`train`]: deterministic mini-batch training with early stopping.
//! - [`eval`]: prediction metrics and triggering-kernel recovery against a
//!   ground-truth specification.
//!
//! Everything is `f64`, single-threaded, and reproducible: all randomness is
//! derived from explicit seeds via [`rng::Stream`].
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live in
//! the companion `sghp` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adam;
pub mod data;
pub mod eval;
pub mod hawkes;
pub mod model;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod tape;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{Dataset, Event, EventSequence, ValidationReport};
pub use hawkes::{appendix_a_spec, HawkesSpec, KernelSpec};
pub use model::{GateKernelParams, ModelConfig, SghpModel};
pub use tape::{Gradients, NodeId, ParamSet, Shape, Tape, Tensor};
pub use train::{train, TrainConfig, TrainReport};
