//! Deterministic fan-out helper.
//!
//! Work is always split into the same chunks regardless of thread count, each
//! chunk is evaluated independently, and results come back in chunk order.
//! Callers fold the returned vector sequentially, so a computation yields
//! bit-identical results whether it runs on one thread, many threads, or the
//! sequential fallback build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item and returns the results in input order.
#[cfg(feature = "parallel")]
pub(crate) fn ordered_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Applies `f` to every item and returns the results in input order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn ordered_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}
