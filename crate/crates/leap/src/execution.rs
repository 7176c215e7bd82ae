//! Parallel / sequential execution shim.
//!
//! Task batches, evaluation runs, seed sweeps and grid searches are all
//! embarrassingly parallel maps over an index range. This module exposes that
//! map once: with the `parallel` feature (the default) it fans out over
//! rayon, without it the same call is a plain sequential loop. Results always
//! come back ordered by index and every downstream reduction folds them in
//! index order, so the numbers are bitwise identical for any thread count —
//! including one.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
/// The output vector is ordered by index regardless of scheduling.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], available under every feature set.
/// The benchmark suite compares the two; tests use it to pin down that the
/// parallel path changes nothing numerically.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}

/// Caps the global worker pool at `threads`. Call before the first parallel
/// map; later calls are ignored (the pool is process-global). A no-op in
/// sequential builds and for `threads == 0` (which means "let the runtime
/// decide").
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            // Ignore the error: the global pool can only be built once and an
            // already-built pool just keeps its size.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let out = map_indexed(100, |i| i * i);
        let expected: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        // A float reduction whose result would drift under reassociation;
        // per-index work is deterministic so both paths must match exactly.
        let work = |i: usize| {
            let mut acc = 0.0f64;
            for k in 1..200 {
                acc += ((i * k) as f64).sin() / k as f64;
            }
            acc
        };
        let par = map_indexed(64, work);
        let seq = map_indexed_seq(64, work);
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn configure_threads_accepts_any_value() {
        configure_threads(0);
        configure_threads(2);
        let out = map_indexed(8, |i| i + 1);
        assert_eq!(out.len(), 8);
    }
}
