//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature the closures run on the rayon pool; without it
//! they run in order on the calling thread. Work is always split the same way
//! and results are always collected in index order, so both builds produce
//! identical numbers.

use std::ops::Range;

/// Columns per work unit for batched inference.
pub const BATCH_CHUNK: usize = 64;

/// Split `0..n` into consecutive ranges of at most `chunk` elements.
pub fn chunks(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|i| i * chunk..((i + 1) * chunk).min(n))
        .collect()
}

/// `f` applied to every index in `0..n`, results in index order.
#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// `f` applied to each chunk of `0..n`, results in chunk order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunks(n, chunk);
    map_indices(ranges.len(), |i| f(ranges[i].clone()))
}

/// Whether this build runs work on the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
