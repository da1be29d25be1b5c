//! Rayon-backed [`Executor`].

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use xbar_core::exec::Executor;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "XBAR_DSE_THREADS";

pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// `threads` of 0 means: `XBAR_DSE_THREADS` if set, else available parallelism.
    pub fn new(threads: usize) -> std::io::Result<Self> {
        let n = match threads {
            0 => worker_count_from_env()?,
            n => n,
        };
        let pool = ThreadPoolBuilder::new()
            .num_threads(n)
            .thread_name(|i| format!("xbar-worker-{i}"))
            .build()
            .map_err(std::io::Error::other)?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

fn worker_count_from_env() -> std::io::Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(std::io::Error::other(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(task).collect())
    }
}
