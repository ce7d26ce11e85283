//! Replica-level execution.
//!
//! Every Monte Carlo routine in the crate funnels its independent replicas
//! through [`map_replicas`]. With the `parallel` feature the replicas are
//! spread over the rayon pool; without it (or after
//! `set_mode(Mode::Sequential)`) they run in a plain loop. Results come back in
//! replica order and every replica owns its RNG stream, so the output is
//! bit-identical in both modes and for any thread count.

use std::sync::atomic::{AtomicU8, Ordering};

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used for all sampling.
pub type Rng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

const SEQUENTIAL: u8 = 0;
const PARALLEL: u8 = 1;

static MODE: AtomicU8 = AtomicU8::new(if cfg!(feature = "parallel") {
    PARALLEL
} else {
    SEQUENTIAL
});

/// Select how replicas are executed. `Parallel` silently degrades to
/// `Sequential` when the crate is built without the `parallel` feature.
pub fn set_mode(mode: Mode) {
    let v = match mode {
        Mode::Sequential => SEQUENTIAL,
        Mode::Parallel => PARALLEL,
    };
    MODE.store(v, Ordering::Relaxed);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == PARALLEL {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream `stream` derived from a base seed.
pub fn replica_rng(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Size the global worker pool. Call once, before any parallel work; later
/// calls fail. Without the `parallel` feature this is a no-op.
pub fn set_threads(threads: usize) -> crate::Result<()> {
    if threads == 0 {
        return Err(crate::Error::param("threads", "must be >= 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| crate::Error::param("threads", e.to_string()))?;
    Ok(())
}

/// Run `f(i)` for `i in 0..count`, returning the results in index order.
pub fn map_replicas<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

/// Same as [`map_replicas`] but over an arbitrary slice of work items.
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_replicas(items.len(), |i| f(&items[i]))
}
