//! Slow-light storage and retrieval in a moving EIT medium.

// Negated float comparisons are used on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod medium;
pub mod state;

pub use error::{Error, Result};
pub mod solver;
