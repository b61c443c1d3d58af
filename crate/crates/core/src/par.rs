//! Data-parallel execution with a sequential fallback.
//!
//! All fan-out in the crate goes through [`Exec::map`], which returns results
//! in index order. Callers derive any randomness from the item index, so the
//! output never depends on the worker count. Without the `parallel` feature
//! every policy runs sequentially.

use std::ops::Range;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Plain loop on the calling thread.
    Sequential,
    /// Rayon fan-out. `threads == 0` uses the global pool.
    #[default]
    Parallel,
    /// Rayon fan-out on a dedicated pool of the given size.
    Threads(usize),
}

impl Exec {
    /// Policy for a requested thread count: 1 means sequential, 0 means the
    /// global pool.
    pub fn with_threads(threads: usize) -> Self {
        match threads {
            0 => Exec::Parallel,
            1 => Exec::Sequential,
            n => Exec::Threads(n),
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Exec::Sequential)
    }

    /// Maps `f` over `range`, collecting results in index order.
    pub fn map<R, F>(&self, range: Range<usize>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            match *self {
                Exec::Sequential => {}
                Exec::Parallel => return range.into_par_iter().map(f).collect(),
                Exec::Threads(n) => {
                    if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                        return pool.install(|| range.into_par_iter().map(&f).collect());
                    }
                }
            }
        }
        range.map(f).collect()
    }
}
