//! Thread-count control.
//!
//! Library code only uses rayon's ambient pool, and every parallel section
//! computes independent outputs with a fixed internal evaluation order, so
//! the thread count never changes results. Binaries call [`pool_from_env`]
//! to honour `PPCMT_THREADS` (0 or unset = rayon default).

use rayon::ThreadPool;

pub const THREADS_ENV: &str = "PPCMT_THREADS";

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// A pool with `threads` workers; 0 means rayon's default.
pub fn pool(threads: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build thread pool")
}

pub fn pool_from_env() -> ThreadPool {
    pool(threads_from_env())
}
