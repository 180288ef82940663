//! Worker pools. Parallel routines split work into fixed-size pieces that do
//! not depend on the worker count, so results are identical for any pool.

/// Runs `f` inside a dedicated rayon pool with `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}
