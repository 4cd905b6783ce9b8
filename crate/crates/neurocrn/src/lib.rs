//! File formats, artifacts and the command-line front end for `neurocrn-core`.

pub mod artifacts;
pub mod cli;
pub mod config;
mod error;
pub mod idx;
pub mod network_format;
pub mod params;

pub use error::{Error, Result};
