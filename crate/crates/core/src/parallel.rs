//! Worker pool shared by rollout collection and cost evaluation.
//!
//! The pool size comes from [`set_workers`] if it was called before first use,
//! otherwise from `SIMOPT_WORKERS`, otherwise from the number of CPUs. Results
//! are always assembled in index order, so outputs do not depend on it.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

static POOL: OnceLock<ThreadPool> = OnceLock::new();
static REQUESTED: OnceLock<usize> = OnceLock::new();

/// Requests a pool size; returns false if the pool already exists or a size was set.
pub fn set_workers(n: usize) -> bool {
    POOL.get().is_none() && REQUESTED.set(n.max(1)).is_ok()
}

#[cfg_attr(target_arch = "wasm32", allow(dead_code))]
fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let n = REQUESTED
            .get()
            .copied()
            .or_else(|| {
                std::env::var("SIMOPT_WORKERS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
    })
}

#[cfg(not(target_arch = "wasm32"))]
pub fn workers() -> usize {
    pool().current_num_threads()
}

/// Browsers without shared memory cannot spawn threads; everything runs inline.
#[cfg(target_arch = "wasm32")]
pub fn workers() -> usize {
    1
}

/// `(0..n).map(f)` across the pool, collected in index order. Inside
/// [`with_workers`] the scoped pool is used instead of the shared one.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if cfg!(target_arch = "wasm32") {
        (0..n).map(f).collect()
    } else if rayon::current_thread_index().is_some() {
        (0..n).into_par_iter().map(f).collect()
    } else {
        pool().install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Runs `f` on a dedicated pool of `n` threads.
pub fn with_workers<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}
