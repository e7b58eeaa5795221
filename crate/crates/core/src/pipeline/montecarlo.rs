use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{derive_seed, Domain};

/// Runs `f(i, seed_i)` for `n` replications in parallel, with `seed_i`
/// derived from `seed` and `i`. Results come back in replication order,
/// whatever the thread count.
pub fn replicate<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i, derive_seed(seed, Domain::Replication, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn ordered_and_thread_independent() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| replicate(50, 9, |i, s| Ok((i, s))).unwrap());
        let b = three.install(|| replicate(50, 9, |i, s| Ok((i, s))).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(k, (i, _))| k == *i));
        let seeds: std::collections::HashSet<u64> = a.iter().map(|p| p.1).collect();
        assert_eq!(seeds.len(), 50);
    }

    #[test]
    fn first_error_surfaces() {
        let r = replicate(10, 1, |i, _| if i == 4 { Err(Error::Estimation("x".into())) } else { Ok(i) });
        assert!(r.is_err());
    }
}
