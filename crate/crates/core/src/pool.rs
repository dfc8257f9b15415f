//! Worker-pool plumbing shared by the bootstrap and the simulation harness.

use rayon::prelude::*;

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "FRAILTY_WORKERS";

/// Worker count: the explicit setting, else `FRAILTY_WORKERS`, else the
/// number of available cores.
pub fn resolve_workers(workers: Option<usize>) -> usize {
    workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `f(0), …, f(n−1)` in index order, run serially for one worker and on a
/// dedicated rayon pool otherwise.
pub fn map_indexed<T, F>(workers: Option<usize>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let w = resolve_workers(workers);
    if w <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("worker pool unavailable ({e}); running serially");
            (0..n).map(f).collect()
        }
    }
}

/// SplitMix64 finaliser applied to `master + (index + 1)·γ`, where γ is the
/// golden-ratio increment. Gives independent-looking child seeds that do not
/// depend on scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
