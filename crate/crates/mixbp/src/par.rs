//! Data-parallel execution switch.
//!
//! Hot scans (oracle candidate sweeps, multi-start solves, benchmark trials)
//! go through [`map_indexed`] so they can run on rayon or sequentially. The
//! `parallel` feature selects the default; callers can force either mode.
//! Results are collected in index order, so the outcome is identical in both
//! modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for data-parallel scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(mode: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Map `f` over fixed-size index chunks `[start, end)`, then fold the chunk
/// results left to right. Chunk boundaries depend only on `chunk` and `n`,
/// so reductions are deterministic regardless of thread count.
pub fn map_chunked<T, F, G, A>(mode: Parallelism, n: u128, chunk: u128, f: F, init: A, fold: G) -> A
where
    T: Send,
    F: Fn(u128, u128) -> T + Sync + Send,
    G: FnMut(A, T) -> A,
{
    let bounds: Vec<(u128, u128)> = {
        let mut v = Vec::new();
        let mut s = 0u128;
        while s < n {
            let e = (s + chunk).min(n);
            v.push((s, e));
            s = e;
        }
        v
    };
    let parts: Vec<T> = match mode {
        Parallelism::Sequential => bounds.iter().map(|&(s, e)| f(s, e)).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => bounds.par_iter().map(|&(s, e)| f(s, e)).collect(),
    };
    parts.into_iter().fold(init, fold)
}

/// Configure the global rayon pool size; no-op without the `parallel`
/// feature or if a pool is already installed.
pub fn configure_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}
