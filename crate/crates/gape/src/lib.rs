//! Experiment harness, file formats and command-line plumbing around
//! [`gape_core`].

pub mod campaign;
mod error;
pub mod harness;
pub mod io;
pub mod stats;

pub use error::{HarnessError, Result};
