//! Data-parallel helpers.
//!
//! Per-node assembly and independent trials go through [`map_indexed`]. With the
//! `parallel` feature the work is spread over the rayon pool; without it, or
//! after [`set_sequential(true)`](set_sequential), everything runs on the calling
//! thread. Outputs are collected in index order either way, so reductions done
//! afterwards are bit-identical between the two modes.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Below this many items the rayon overhead is not worth paying.
pub const MIN_PARALLEL_LEN: usize = 64;

/// Force sequential execution even when the `parallel` feature is compiled in.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Evaluate `f(0..n)` and collect the results in order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= MIN_PARALLEL_LEN && is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] for coarse-grained jobs (trials, levels): never skips
/// parallelism because of a small item count.
pub fn map_jobs<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n > 1 && is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Sum in index order; used for every quadrature so results do not depend on
/// the thread count.
pub fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc + v)
}
