// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats, run directories and the command-line pipeline around
//! [`saif_core`].

pub mod artifacts;
pub mod bundle;
pub mod cli;
pub mod error;
pub mod files;
pub mod manifest;
pub mod parallel;
pub mod rundir;
pub mod sae_io;
pub mod transcript;

pub use error::{Error, Result};
pub use saif_core;
