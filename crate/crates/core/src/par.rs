//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the index range is split across the
//! rayon pool; without it the same closures run on the calling thread. Results
//! are always collected in index order, so reductions performed on the output
//! are independent of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Caps the global worker pool. A no-op without the `parallel` feature, and
/// after the pool has already been initialised.
pub fn configure_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

/// Whether this build runs pair scans on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Index-ordered minimum by a key, first occurrence wins on ties.
pub(crate) fn argmin_by_key<T, K: Fn(&T) -> f64>(items: &[T], key: K) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in items.iter().enumerate() {
        let k = key(it);
        let better = match best {
            None => true,
            Some((_, b)) => k < b || (b.is_nan() && !k.is_nan()),
        };
        if better {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}
