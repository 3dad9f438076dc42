//! Data-parallel helpers. With the `parallel` feature these fan out over
//! rayon; without it they run sequentially. Every helper preserves input
//! order, and reductions are done in fixed-size chunks combined in order,
//! so results are bit-identical regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for order-stable reductions.
pub const CHUNK: usize = 256;

#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}

/// Fallible variant of [`map_range`]; returns the first error in index order.
pub fn try_map_range<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Reduce `0..n` by folding each fixed chunk sequentially (in parallel across
/// chunks), then combining chunk results left to right.
pub fn chunked_reduce<A, F, G>(
    n: usize,
    init: impl Fn() -> A + Sync + Send,
    fold: F,
    combine: G,
) -> A
where
    A: Send,
    F: Fn(&mut A, usize) + Sync + Send,
    G: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts = map_range(chunks, |c| {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in parts {
        combine(&mut total, p);
    }
    total
}

/// Number of worker threads the current pool would use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Size the global pool. Must run before any parallel work; a no-op in
/// sequential builds.
pub fn init_threads(n: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}
