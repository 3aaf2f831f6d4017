//! Autocorrelated test chains, effective sample sizes, and thinning.
//!
//! ESS estimates use split chains, the multi-chain autocovariance with the
//! between-chain variance correction, and Geyer's initial monotone sequence
//! truncation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sampling::{quantile_type7, replicate_rng};
use crate::transform::ChainSet;

pub const MIN_CHAIN_LENGTH: usize = 8;

/// Stationary AR(1) chains `x_t = phi x_{t-1} + e_t`, rescaled to unit
/// marginal variance. Chain `c` uses replicate stream `c` of `seed`.
pub fn ar1_simulate(phi: f64, n: usize, chains: usize, seed: u64) -> Result<ChainSet> {
    if phi.is_nan() || phi.abs() >= 1.0 {
        return Err(Error::InvalidPhi(phi));
    }
    if n == 0 || chains == 0 {
        return Err(Error::InvalidInput(
            "need at least one draw and one chain".into(),
        ));
    }
    let scale = (1.0 - phi * phi).sqrt();
    let out = (0..chains)
        .map(|c| {
            let mut rng = replicate_rng(seed, c as u64);
            let mut x: f64 = rng.sample::<f64, _>(StandardNormal) / scale;
            let mut chain = Vec::with_capacity(n);
            chain.push(x * scale);
            for _ in 1..n {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                chain.push(x * scale);
            }
            chain
        })
        .collect();
    ChainSet::new(out)
}

/// Split every chain into two halves, dropping the middle draw of odd
/// lengths.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// ESS of equal-length chains (already split when desired).
fn ess_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let centered: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let nf = n as f64;
    // mean over chains of the biased autocovariance at lag t
    let acov = |t: usize| -> f64 {
        centered
            .iter()
            .map(|c| {
                c[..n - t]
                    .iter()
                    .zip(&c[t..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let grand = means.iter().sum::<f64>() / m as f64;
        var_plus += means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    }
    if var_plus.is_nan() || var_plus <= 0.0 || !var_plus.is_finite() {
        // constant series: no information about dependence
        return total;
    }
    let rho = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;

    let max_lag = (n / 2).min(n.saturating_sub(4)).max(2);
    let mut r = vec![0.0; max_lag + 2];
    r[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    r[1] = odd;
    let mut t = 1;
    while t + 2 < max_lag && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            r[t + 1] = even;
            r[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 {
        r[max_t + 1] = even;
    }
    // initial monotone sequence
    let mut t = 1;
    while t + 3 <= max_t {
        if r[t + 1] + r[t + 2] > r[t - 1] + r[t] {
            r[t + 1] = (r[t - 1] + r[t]) / 2.0;
            r[t + 2] = r[t + 1];
        }
        t += 2;
    }
    let tau = (-1.0 + 2.0 * r[..max_t].iter().sum::<f64>() + r[max_t + 1]).max(1.0 / total.log10());
    total / tau
}

fn check_length(chains: &ChainSet) -> Result<()> {
    if chains.len() < MIN_CHAIN_LENGTH {
        return Err(Error::ChainTooShort(chains.len()));
    }
    Ok(())
}

/// ESS for estimating the mean.
pub fn ess_mean(chains: &ChainSet) -> Result<f64> {
    check_length(chains)?;
    Ok(ess_basic(&split_chains(chains.chains())))
}

/// Normal scores of pooled average ranks, `Phi^-1((r - 3/8) / (S + 1/4))`.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let flat: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = flat.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && flat[order[j + 1]] == flat[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let z: Vec<f64> = ranks
        .iter()
        .map(|r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25)))
        .collect();
    z.chunks(n).map(<[f64]>::to_vec).collect()
}

/// ESS of rank-normalized split chains.
pub fn ess_bulk(chains: &ChainSet) -> Result<f64> {
    check_length(chains)?;
    Ok(ess_basic(&rank_normalize(&split_chains(chains.chains()))))
}

fn pooled_quantile(chains: &ChainSet, prob: f64) -> f64 {
    let mut flat: Vec<f64> = chains.chains().iter().flatten().copied().collect();
    quantile_type7(&mut flat, prob)
}

/// ESS of the indicator `1[x <= q_prob]` at the pooled empirical quantile.
pub fn ess_quantile(chains: &ChainSet, prob: f64) -> Result<f64> {
    check_length(chains)?;
    let q = pooled_quantile(chains, prob);
    let indicators: Vec<Vec<f64>> = chains
        .chains()
        .iter()
        .map(|c| c.iter().map(|&x| if x <= q { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(ess_basic(&split_chains(&indicators)))
}

/// Smaller of the 5% and 95% quantile ESSs.
pub fn ess_tail(chains: &ChainSet) -> Result<f64> {
    Ok(ess_quantile(chains, 0.05)?.min(ess_quantile(chains, 0.95)?))
}

/// The 19 quantile levels `0.05, 0.10, ..., 0.95`.
pub fn quantile_levels() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub ess_mean: f64,
    pub ess_bulk: f64,
    pub ess_tail: f64,
    /// ESS of indicators at the 19 quantile levels.
    pub ess_quantiles: Vec<f64>,
    pub chains: usize,
    pub draws_per_chain: usize,
}

impl EssReport {
    pub fn total_draws(&self) -> usize {
        self.chains * self.draws_per_chain
    }
}

pub fn ess_report(chains: &ChainSet) -> Result<EssReport> {
    check_length(chains)?;
    let ess_quantiles = quantile_levels()
        .into_iter()
        .map(|p| ess_quantile(chains, p))
        .collect::<Result<Vec<_>>>()?;
    // the 5% and 95% levels are the first and last of the 19
    let ess_tail = ess_quantiles[0].min(ess_quantiles[18]);
    Ok(EssReport {
        ess_mean: ess_mean(chains)?,
        ess_bulk: ess_bulk(chains)?,
        ess_tail,
        ess_quantiles,
        chains: chains.num_chains(),
        draws_per_chain: chains.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    /// ESS of the mean.
    MeanEss,
    /// Smallest ESS over the 19 quantile indicators.
    Quantile19,
    /// Smaller of bulk-ESS and tail-ESS.
    BulkTailMin,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "MEAN_ESS" => Ok(Strategy::MeanEss),
            "QUANTILE_19" => Ok(Strategy::Quantile19),
            "BULK_TAIL_MIN" => Ok(Strategy::BulkTailMin),
            _ => Err(Error::InvalidInput(format!(
                "unknown thinning strategy {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinningPlan {
    pub strategy: Strategy,
    pub factor: usize,
    /// Draws per chain kept after thinning.
    pub length: usize,
    /// The ESS the factor was derived from.
    pub ess: f64,
}

/// `T = ceil(total / ess)`, at least 1.
pub fn factor_for_ess(total: usize, ess: f64) -> usize {
    let t = (total as f64 / ess).ceil();
    if t.is_finite() && t >= 1.0 {
        t as usize
    } else {
        1
    }
}

/// Kept length of a chain of `n` draws thinned by `t` (indices `0, t, 2t, ...`).
pub fn thinned_length(n: usize, t: usize) -> usize {
    n.div_ceil(t)
}

pub fn thinning_factor(report: &EssReport, n_total: usize, strategy: Strategy) -> ThinningPlan {
    let ess = match strategy {
        Strategy::MeanEss => report.ess_mean,
        Strategy::Quantile19 => report
            .ess_quantiles
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        Strategy::BulkTailMin => report.ess_bulk.min(report.ess_tail),
    };
    let factor = factor_for_ess(n_total, ess);
    let per_chain = n_total / report.chains.max(1);
    ThinningPlan {
        strategy,
        factor,
        length: thinned_length(per_chain, factor),
        ess,
    }
}

/// Keep draws `0, t, 2t, ...` of every chain.
pub fn thin(chains: &ChainSet, t: usize) -> Result<ChainSet> {
    if t == 0 {
        return Err(Error::InvalidInput(
            "thinning factor must be at least 1".into(),
        ));
    }
    ChainSet::new(
        chains
            .chains()
            .iter()
            .map(|c| c.iter().step_by(t).copied().collect())
            .collect(),
    )
}
