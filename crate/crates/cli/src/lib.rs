//! Orchestration for the `forge` command-line tool.

pub mod align;
pub mod config;
pub mod datasets;
pub mod evaluate;
pub mod jsonl;
pub mod search;

/// Worker count: `FORGE_THREADS` when set to a positive integer, otherwise
/// the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("FORGE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
