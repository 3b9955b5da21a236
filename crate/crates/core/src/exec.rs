//! Pluggable execution of independent jobs. Results always come back in job
//! order, so the choice of executor never changes an outcome.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Runs `job(0..n)` and collects results in index order.
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(job).collect()
    }
}
