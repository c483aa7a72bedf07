//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the batch helpers run on the rayon
//! pool; without it they reduce to plain iterators. Results are always
//! returned in input order, so downstream reductions are deterministic.

/// Maps `op` over `items`, in parallel when the `parallel` feature is on.
pub fn map<T, R, F>(items: &[T], op: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    actual::map(items, op)
}

/// Maps `op` over `0..n`.
pub fn map_range<R, F>(n: usize, op: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    actual::map_range(n, op)
}

/// Sequential reference version of [`map`], used by benches and tests.
pub fn map_seq<T, R, F>(items: &[T], op: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(op).collect()
}

/// Maximum of a finite float batch (order independent, so safe in parallel).
pub fn max_f64(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Caps the global worker pool. Returns false if the pool was already built.
pub fn init_threads(threads: Option<usize>) -> bool {
    actual::init_threads(threads)
}

#[cfg(feature = "parallel")]
mod actual {
    use rayon::prelude::*;

    pub fn map<T, R, F>(items: &[T], op: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(op).collect()
    }

    pub fn map_range<R, F>(n: usize, op: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(op).collect()
    }

    pub fn init_threads(threads: Option<usize>) -> bool {
        let Some(n) = threads else { return true };
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .is_ok()
    }
}

#[cfg(not(feature = "parallel"))]
mod actual {
    pub fn map<T, R, F>(items: &[T], op: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(op).collect()
    }

    pub fn map_range<R, F>(n: usize, op: F) -> Vec<R>
    where
        F: Fn(usize) -> R,
    {
        (0..n).map(op).collect()
    }

    pub fn init_threads(_threads: Option<usize>) -> bool {
        true
    }
}
