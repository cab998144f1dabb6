//! Data-parallel execution over independent, indexed tasks.
//!
//! Results always come back in index order, so output never depends on the
//! worker count. Without the `parallel` feature every request runs inline.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel { workers: usize },
}

impl Execution {
    /// `Parallel` for more than one worker, `Sequential` otherwise.
    pub fn with_workers(workers: usize) -> Self {
        if workers > 1 {
            Execution::Parallel { workers }
        } else {
            Execution::Sequential
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Execution::Sequential => 1,
            Execution::Parallel { workers } => *workers,
        }
    }

    /// Evaluates `f(0), …, f(n − 1)`.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel { workers } => parallel_map(*workers, n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<R, F>(workers: usize, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<R, F>(_workers: usize, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let f = |i: usize| (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 7;
        let seq = Execution::Sequential.map(1000, f);
        for w in [2, 3, 8] {
            assert_eq!(Execution::with_workers(w).map(1000, f), seq);
        }
        assert_eq!(Execution::with_workers(1), Execution::Sequential);
        assert_eq!(Execution::with_workers(4).workers(), 4);
    }
}
