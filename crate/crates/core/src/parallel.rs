//! Ensemble fan-out: rayon when the `parallel` feature is on, plain
//! iteration otherwise. Results are collected by index, so the output is
//! identical regardless of thread count or scheduling.

/// Thread budget for ensemble loops. `None` means the rayon default
/// (hardware parallelism); `Some(1)` forces the sequential path.
pub type Threads = Option<usize>;

/// Sequential reference implementation, always available. The benchmark
/// suite compares this against the parallel path.
pub fn map_indexed_seq<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(
    n: usize,
    threads: Threads,
    f: impl Fn(usize) -> T + Send + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    match threads {
        Some(1) => map_indexed_seq(n, f),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build();
            match pool {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                Err(_) => map_indexed_seq(n, f),
            }
        }
        None => (0..n).into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send>(
    n: usize,
    _threads: Threads,
    f: impl Fn(usize) -> T + Send + Sync,
) -> Vec<T> {
    map_indexed_seq(n, f)
}
