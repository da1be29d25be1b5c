//! Command-line driver, file formats and thread pool for `xbar-core`.

pub mod cli;
pub mod config;
pub mod desk;
pub mod emit;
pub mod error;
pub mod exec;
pub mod formats;
pub mod manifest;

pub use error::{Error, Result};
