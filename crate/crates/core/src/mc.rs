//! Deterministic batching of Monte Carlo paths.
//!
//! Paths are cut into fixed batches; each batch is reduced on one worker
//! and the batch results are returned in batch order, so any merge over
//! them is independent of the number of threads.

use std::ops::Range;

pub const DEFAULT_BATCH: u64 = 256;

pub fn batched<T, F>(n_paths: u64, batch: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let batch = batch.max(1);
    let n_batches = n_paths.div_ceil(batch);
    let range = move |b: u64| b * batch..((b + 1) * batch).min(n_paths);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_batches).into_par_iter().map(|b| f(range(b))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_batches).map(|b| f(range(b))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_range_in_order() {
        let out = batched(10, 4, |r| (r.start, r.end));
        assert_eq!(out, vec![(0, 4), (4, 8), (8, 10)]);
        assert!(batched(0, 4, |r| r.start).is_empty());
    }
}
