//! Thin seam between the rayon-backed and sequential execution paths.
//!
//! Every parallel loop in the crate funnels through `map_indexed`, which
//! preserves input order in its output, so results are identical with or
//! without the `parallel` feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Run `f` inside a pool of `jobs` threads (0 = rayon default). Without the
/// `parallel` feature the job count is ignored and `f` runs inline.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R>(_jobs: usize, f: impl FnOnce() -> R) -> R {
    f()
}
