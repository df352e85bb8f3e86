//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) these run on the rayon pool that is
//! current at the call site; without it they fall back to plain iterators.
//! Both paths return results in index order and partition work identically,
//! so floating-point reductions built on them are bit-identical regardless of
//! thread count or feature selection.

use std::ops::Range;

/// Samples per work unit for batch reductions.
pub const BATCH_CHUNK: usize = 1024;

fn chunk_ranges(len: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..len.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(len))
        .collect()
}

/// `f(0), ..., f(n-1)`, in order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(n, f)
    }
}

pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive ranges of at most `chunk` indices covering
/// `0..len`, returning the partial results in range order.
pub fn map_chunks<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(len, chunk);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if ranges.len() > 1 {
            return ranges.into_par_iter().map(f).collect();
        }
    }
    ranges.into_iter().map(f).collect()
}

pub fn map_chunks_sequential<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    F: Fn(Range<usize>) -> T,
{
    chunk_ranges(len, chunk).into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_tile_the_input() {
        let r = chunk_ranges(10, 4);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(chunk_ranges(0, 4).is_empty());
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = |r: Range<usize>| r.map(|i| (i as f64).sqrt()).sum::<f64>();
        let a = map_chunks(100_000, 333, f);
        let b = map_chunks_sequential(100_000, 333, f);
        assert_eq!(a, b);
        assert_eq!(map_indexed(50, |i| i * i), map_indexed_sequential(50, |i| i * i));
    }
}
