//! Execution mode for the data-parallel loops (matrix application, Monte
//! Carlo sampling, exhaustive enumeration).
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] runs the
//! same code sequentially. Results never depend on the mode: parallel loops
//! only map independent items, and reductions happen in index order or on
//! exact integer counters.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f).collect()`, possibly in parallel. Output order is the
    /// index order either way.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Splits `0..n` into runs of `block` consecutive indices, maps `f` over
    /// them and returns the per-run results in order.
    pub fn map_blocks<T, F>(self, n: u64, block: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
    {
        let block = block.max(1);
        let count = n.div_ceil(block) as usize;
        self.map_range(count, |i| {
            let start = i as u64 * block;
            f(start..(start + block).min(n))
        })
    }
}

/// Limits rayon's global pool to `threads` workers. Returns `false` when the
/// pool was already initialized or the crate is built without `parallel`.
pub fn set_worker_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i * i) as u64;
        assert_eq!(Execution::Sequential.map_range(1000, f), Execution::Parallel.map_range(1000, f));
        let blocks = Execution::Parallel.map_blocks(10, 3, |r| r.collect::<Vec<_>>());
        assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9]]);
    }
}
