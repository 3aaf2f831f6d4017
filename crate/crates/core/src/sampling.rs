//! Seeded replicate streams and empirical quantiles shared by the Monte Carlo
//! routines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for replicate `index`, derived only from
/// `(seed, index)` so results do not depend on scheduling.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Run `f` for every replicate index, in parallel when enabled. Output order
/// follows the index.
pub fn map_replicates<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Linear-interpolation sample quantile (R's default "type 7").
pub fn quantile_type7(values: &mut [f64], prob: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let h = (values.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// Standard error of a Monte Carlo proportion.
pub fn proportion_se(rate: f64, replicates: usize) -> f64 {
    (rate * (1.0 - rate) / replicates as f64).sqrt()
}
