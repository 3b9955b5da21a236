//! Thread-pool execution of core jobs.

use plgg_core::exec::Executor;
use rayon::prelude::*;

/// Runs jobs on a dedicated rayon pool. Results come back in job order.
pub struct Rayon {
    pool: rayon::ThreadPool,
}

impl Rayon {
    /// `None` uses one thread per available core.
    pub fn new(workers: Option<usize>) -> Self {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            builder = builder.num_threads(n.max(1));
        }
        Rayon { pool: builder.build().expect("thread pool") }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}
