//! Task execution abstraction.
//!
//! Sampling, sweeps and dataset generation are expressed as independent
//! indexed tasks. The core runs them in order; the `xbar-dse` crate provides
//! a thread-pool implementation. Results are always returned in index order,
//! so outputs do not depend on the executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `task(i)` for every `i in 0..count`, returning results in index order.
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every task on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(task).collect()
    }
}
