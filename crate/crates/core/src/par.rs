//! Data-parallel helpers. With the `parallel` feature off every helper
//! runs sequentially and produces identical results.

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Sums `f(i)` for `i` in `0..n`, split into fixed chunks so the result
/// does not depend on scheduling.
pub fn sum_chunks<F>(n: u64, chunk: u64, f: F) -> u64
where
    F: Fn(std::ops::Range<u64>) -> u64 + Sync + Send,
{
    let chunks: Vec<_> = (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect();
    map(&chunks, |r| f(r.clone())).into_iter().sum()
}

pub fn sum_chunks_seq<F>(n: u64, chunk: u64, f: F) -> u64
where
    F: Fn(std::ops::Range<u64>) -> u64,
{
    (0..n.div_ceil(chunk))
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .sum()
}
