//! Data-parallel maps over independent sweep points.
//!
//! With the `parallel` feature the maps run on rayon; without it they fall
//! back to a plain loop. Results keep the input order either way, so sweep
//! outputs do not depend on scheduling.

use crate::error::{Result, UomError};

/// Maps `f` over `items`, in parallel when the feature is on.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seq_map(items, f)
    }
}

/// Sequential reference for [`par_map`].
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Fallible [`par_map`]; returns the first error in input order.
pub fn try_par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    par_map(items, f).into_iter().collect()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Runs `f` with sweeps limited to `jobs` worker threads (`None` keeps
/// the global default). Without the `parallel` feature `jobs` is ignored.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == Some(0) {
        return Err(UomError::InvalidArgument("jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| UomError::InvalidArgument(format!("cannot start {n} workers: {e}")))?;
        return Ok(pool.install(f));
    }
    Ok(f())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs: Vec<u64> = (0..200).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(par_map(&xs, sq), seq_map(&xs, sq));
        let r = with_jobs(Some(2), || par_map(&xs, sq)).unwrap();
        assert_eq!(r, seq_map(&xs, sq));
        assert!(with_jobs(Some(0), || 1).is_err());
    }

    #[test]
    fn first_error_wins() {
        let xs = [1, 2, 3, 4];
        let r = try_par_map(&xs, |&x| {
            if x >= 3 {
                Err(UomError::InvalidArgument(format!("{x}")))
            } else {
                Ok(x)
            }
        });
        assert_eq!(r, Err(UomError::InvalidArgument("3".into())));
    }
}
