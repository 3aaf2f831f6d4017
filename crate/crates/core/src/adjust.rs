//! The adjusted coverage parameter `gamma`: the pointwise two-tail level at
//! which per-point quantile bands reach a requested simultaneous coverage.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::brent_minimize;
use crate::sampling::quantile_type7;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_REPLICATES: usize = 10_000;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    Simulation,
    Optimization,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    pub gamma: f64,
    /// Simultaneous coverage of the bands built from `gamma`.
    pub attained_coverage: f64,
    pub method: GammaMethod,
    /// Replicates for simulation, coverage evaluations for optimization.
    pub iterations: usize,
}

/// How to obtain `gamma` for a test.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Optimize {
        tol: f64,
    },
    Simulate {
        replicates: usize,
        seed: u64,
    },
    /// A precomputed value, e.g. from a cache.
    Fixed(GammaResult),
}

impl Default for Method {
    fn default() -> Self {
        Method::Optimize { tol: DEFAULT_TOL }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

pub(crate) fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates {
            required: MIN_REPLICATES,
            got: replicates,
        });
    }
    Ok(())
}

/// Exact simultaneous coverage as a function of `gamma`.
pub(crate) trait CoverageModel {
    fn coverage(&self, gamma: f64) -> f64;

    /// Values of `gamma` in `(0, alpha)` at which some band edge moves. The
    /// coverage is constant between consecutive breakpoints.
    fn breakpoints(&self, alpha: f64) -> Vec<f64>;
}

/// Breakpoints contributed by one marginal CDF: the lower quantile of
/// `gamma/2` moves at `gamma = 2 F(k)`, the upper one at `gamma = 2 (1 - F(k))`.
pub(crate) fn push_breakpoints(cdf: &[f64], alpha: f64, out: &mut Vec<f64>) {
    for &c in cdf {
        for g in [2.0 * c, 2.0 * (1.0 - c)] {
            if g > 0.0 && g < alpha {
                out.push(g);
            }
        }
    }
}

/// Minimize `|1 - alpha - coverage(gamma)|` over `[0, alpha]` with Brent's
/// method, then settle on the best constant-coverage step near the result.
pub(crate) fn optimize_gamma<M: CoverageModel>(
    model: &M,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GammaResult> {
    check_alpha(alpha)?;
    let target = 1.0 - alpha;
    let min = brent_minimize(
        |g| (target - model.coverage(g)).abs(),
        0.0,
        alpha,
        tol,
        max_iter,
    );
    if !min.converged {
        return Err(Error::NonConvergence(max_iter));
    }

    let mut edges = model.breakpoints(alpha);
    edges.push(0.0);
    edges.push(alpha);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let steps = edges.len() - 1;
    let mid = |j: usize| 0.5 * (edges[j] + edges[j + 1]);

    let mut cache: HashMap<usize, f64> = HashMap::new();
    let mut cov = |j: usize| *cache.entry(j).or_insert_with(|| model.coverage(mid(j)));

    // coverage is nonincreasing in the step index: locate the last step with
    // coverage >= target and its successor
    let start = edges.partition_point(|&e| e <= min.x).clamp(1, steps) - 1;
    let (above, below) = if cov(start) >= target {
        let mut lo = start;
        let mut hi = None;
        let mut step = 1;
        while lo < steps - 1 {
            let probe = (lo + step).min(steps - 1);
            if cov(probe) >= target {
                lo = probe;
                step *= 2;
            } else {
                hi = Some(probe);
                break;
            }
        }
        (Some(lo), hi)
    } else {
        let mut hi = start;
        let mut lo = None;
        let mut step = 1;
        while hi > 0 {
            let probe = hi.saturating_sub(step);
            if cov(probe) < target {
                hi = probe;
                step *= 2;
            } else {
                lo = Some(probe);
                break;
            }
        }
        (lo, Some(hi))
    };
    let (above, below) = match (above, below) {
        (Some(mut a), Some(mut b)) => {
            while b - a > 1 {
                let m = a + (b - a) / 2;
                if cov(m) >= target {
                    a = m;
                } else {
                    b = m;
                }
            }
            (Some(a), Some(b))
        }
        other => other,
    };

    let best = match (above, below) {
        (Some(a), Some(b)) => {
            if (cov(b) - target).abs() < (cov(a) - target).abs() {
                b
            } else {
                a
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("at least one step exists"),
    };
    let attained = cov(best);
    Ok(GammaResult {
        gamma: mid(best),
        attained_coverage: attained,
        method: GammaMethod::Optimization,
        iterations: min.evaluations + cache.len(),
    })
}

/// `gamma` as the empirical `alpha` quantile of per-replicate minimal levels.
pub(crate) fn gamma_from_replicates(mut per_replicate: Vec<f64>, alpha: f64) -> f64 {
    quantile_type7(&mut per_replicate, alpha)
}
