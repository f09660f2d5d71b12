//! Deterministic data-parallel evaluation over parameter grids.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Thread count from an explicit setting, falling back to the
/// `PHONON_LAB_THREADS` environment variable, then to rayon's default (0).
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var("PHONON_LAB_THREADS")
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .unwrap_or(0)
}

/// Map `f` over `items` on a pool of `threads` workers (0 = all cores).
///
/// Results come back in input order and each one depends only on its index
/// and item, so the output does not depend on the thread count.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .with_max_len(1)
            .map(|(i, item)| f(i, item))
            .collect()
    }))
}

/// SplitMix64 finalizer; derives independent per-point seeds from a base
/// seed and an index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
