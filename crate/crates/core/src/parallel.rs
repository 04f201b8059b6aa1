//! Worker-count aware map helpers.
//!
//! `workers == 1` always runs on the calling thread. `workers == 0` means
//! "use the global rayon pool". Any other value builds a dedicated pool of
//! that size. Without the `parallel` feature every call is sequential.
//!
//! Results are always returned in input order, so callers that fold them
//! left-to-right get the same answer for every worker count.

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers != 1 && items.len() > 1 {
            use rayon::prelude::*;
            return install(workers, || items.par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, workers: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers != 1 && n > 1 {
            use rayon::prelude::*;
            return install(workers, || (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Splits `items` into at most `parts` contiguous chunks of near-equal size.
pub fn partition<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let parts = parts.max(1).min(items.len().max(1));
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}

/// Number of partitions to use for map-reduce style work.
pub fn effective_workers(workers: usize) -> usize {
    match workers {
        #[cfg(feature = "parallel")]
        0 => rayon::current_num_threads(),
        #[cfg(not(feature = "parallel"))]
        0 => 1,
        n => n,
    }
}

#[cfg(feature = "parallel")]
fn install<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return op();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(op),
        Err(err) => {
            log::warn!("could not build a {workers}-thread pool ({err}); using the global pool");
            op()
        }
    }
}
