// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the core crate.

use alloc::string::String;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong inside the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands do not have conforming shapes.
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A value that must be finite is NaN or infinite.
    NonFinite { what: &'static str, index: usize },
    /// An index is past the end of its range.
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    /// A collection that must be non-empty is empty.
    Empty(&'static str),
    /// A tensor expected in a bundle is absent.
    MissingTensor(String),
    /// A configuration value violates its documented constraint.
    InvalidConfig(String),
    /// A named tensor has the wrong width.
    TensorDim {
        name: String,
        expected: usize,
        got: usize,
    },
    /// A ballot did not contain exactly five votes.
    WrongVoteCount(usize),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at index {index}")
            }
            Error::IndexOutOfRange { what, index, bound } => {
                write!(f, "{what} index {index} out of range (bound {bound})")
            }
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::MissingTensor(name) => write!(f, "missing tensor `{name}`"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::TensorDim {
                name,
                expected,
                got,
            } => write!(f, "tensor `{name}` has width {got}, expected {expected}"),
            Error::WrongVoteCount(n) => write!(f, "ballot must have exactly 5 votes, got {n}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn ensure_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch {
            what,
            expected,
            got,
        })
    }
}
