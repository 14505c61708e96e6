// SPDX-License-Identifier: MIT OR Apache-2.0

//! # saif-core
//!
//! Pure algorithmic core for finding instruction-relevant sparse-autoencoder
//! latents and turning them into residual-stream steering vectors.
//!
//! The pipeline has three stages:
//!
//! 1. [`pairset`] renders positive (with instruction) and negative (content
//!    only) prompts and binds exported residual vectors to SAE latents.
//! 2. [`select`] counts, per latent, how often it switches on when the
//!    instruction is present and keeps the top-`k` most responsive latents.
//! 3. [`steer`] weights the selected decoder rows by their mean activation
//!    (plus `beta` standard deviations) and adds the sum to the residual
//!    stream.
//!
//! [`toy`] generates synthetic pair data with planted ground-truth latents so
//! every stage can be checked exactly, and [`eval`] implements the five-vote
//! grading protocol and the strict/loose accuracy metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! anything touching the filesystem live in the `saif` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod pairset;
pub mod sae;
pub mod select;
pub mod steer;
pub mod tensor;
pub mod toy;

pub use error::{Error, Result};
pub use eval::{Ballot, EvalReport, Grade};
pub use pairset::{InstructionSpec, PairManifestEntry, PairRecord, PositionMode};
pub use sae::{LatentVector, Nonlinearity, SaeParams};
pub use select::{FeatureSet, FeatureStats, SensitivityTable};
pub use steer::{CompositeSteeringVector, SteeringVectorSet};
pub use tensor::{DenseMatrix, DenseVector, Tensor, TensorBundle};
pub use toy::{PlantConfig, SyntheticDataset};
