//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the batch helpers fan out over
//! the rayon pool; without it everything runs on the calling thread. Output
//! order always matches input order, so results are identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the parallel helpers stay on the calling thread.
pub const PAR_THRESHOLD: usize = 64;

/// Maps `f` over `items` on the calling thread.
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving map that is parallel when the feature is enabled and the
/// batch is large enough to pay for the fan-out.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if items.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
            return map_par(items, f);
        }
    }
    map_seq(items, f)
}

/// Index-based variant of [`map`] for work described by a range.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Runs `f` over `items` on a dedicated pool of `threads` workers. Each item
/// is a coarse unit of work; nested [`map`] calls share the same pool.
pub fn map_with_threads<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 1 && items.len() > 1 {
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => return pool.install(|| items.par_iter().map(f).collect()),
                Err(e) => log::warn!("falling back to sequential execution: {e}"),
            }
        }
    }
    let _ = threads;
    map_seq(items, f)
}

/// Whether this build was compiled with the rayon backend.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = map(&xs, |x| x * 3);
        assert_eq!(ys, map_seq(&xs, |x| x * 3));
        assert_eq!(map_range(1000, |i| i as u64 * 3), ys);
        assert_eq!(map_with_threads(&xs, 3, |x| x * 3), ys);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn par_matches_seq() {
        let xs: Vec<f64> = (0..513).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * 1e3).floor();
        assert_eq!(map_par(&xs, f), map_seq(&xs, f));
    }
}
