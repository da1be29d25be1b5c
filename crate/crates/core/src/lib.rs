//! Synaptic crossbar simulation and design-space exploration.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure computation:
//! bit-cell device models, crossbar netlist construction, a Newton/MNA DC
//! solver, robustness metrics (non-ideality factor and sense margin),
//! parameter sweeps with variation Monte Carlo, an MLP surrogate of the
//! column non-ideality, and a bit-sliced inference pipeline.
//!
//! File formats, the command-line front end and the thread pool live in the
//! `xbar-dse` crate, which plugs a parallel [`exec::Executor`] into the
//! routines below.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod devices;
pub mod dse;
pub mod error;
pub mod exec;
pub mod inference;
pub mod metrics;
mod numeric;
pub mod rng;
pub mod solver;
pub mod surrogate;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
