//! Sequential / data-parallel dispatch.
//!
//! With the `parallel` feature the [`Parallelism::Parallel`] arm runs on the
//! rayon pool; without it every call falls back to the sequential loop.
//! Results are identical either way.

/// How a bulk operation is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Below this many elements the parallel arm is not worth the split.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 1 << 12;

/// `(0..len).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(par: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..len).map(f).collect()
}

/// Apply `f` to every chunk of `data` of length `chunk`.
pub(crate) fn for_each_chunk<T, F>(par: Parallelism, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() && data.len() >= PAR_THRESHOLD {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).for_each(f);
        return;
    }
    let _ = par;
    data.chunks_mut(chunk).for_each(f);
}

/// Run both closures, possibly concurrently.
pub fn join<A, B, RA, RB>(par: Parallelism, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return rayon::join(a, b);
    }
    let _ = par;
    (a(), b())
}
