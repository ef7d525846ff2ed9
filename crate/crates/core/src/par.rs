//! Index-ordered batch execution.
//!
//! [`map_indices`] evaluates a closure for every index of a range and returns
//! the results in index order. With the `parallel` feature the work is spread
//! over a rayon pool; otherwise it runs on the calling thread. Results never
//! depend on the worker count because each index is computed independently and
//! collected in order.

/// Number of workers; `0` means "use the rayon default".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub const SEQUENTIAL: Workers = Workers(1);
}

#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(count: usize, workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;

    if workers.0 == 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let run = || (0..count).into_par_iter().map(&f).collect::<Vec<T>>();
    if workers.0 == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers.0).build() {
            Ok(pool) => pool.install(run),
            Err(_) => (0..count).map(&f).collect(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(count: usize, _workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
