//! Binomial, hypergeometric and multivariate hypergeometric kernels.
//!
//! Point masses are evaluated with the saddle-point expansion (Stirling
//! remainder plus deviance term), which keeps the relative error near machine
//! precision even for populations in the millions. CDFs sum the smaller tail
//! outward from the mode and stop once the terms no longer change the sum.

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Tolerance used when comparing a CDF value against a requested quantile
/// level, so that levels equal to a CDF value up to rounding select that value.
const QUANTILE_FUZZ: f64 = 1.0 - 64.0 * f64::EPSILON;

/// A natural-log probability (`value <= 0`, negative infinity allowed).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value > 0.0 {
            return Err(Error::InvalidParams(format!("log weight {value} > 0")));
        }
        Ok(LogWeight(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

/// Parameters of a multivariate hypergeometric distribution: `draws` items
/// drawn without replacement from pools of the given sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MHypParams {
    populations: Vec<u64>,
    draws: u64,
}

impl MHypParams {
    pub fn new(populations: Vec<u64>, draws: u64) -> Result<Self> {
        let total: u64 = populations.iter().sum();
        if draws > total {
            return Err(Error::InvalidParams(format!(
                "draws {draws} exceed total population {total}"
            )));
        }
        Ok(MHypParams { populations, draws })
    }

    pub fn populations(&self) -> &[u64] {
        &self.populations
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn total(&self) -> u64 {
        self.populations.iter().sum()
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    if n <= 15 {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        return fact.ln() - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    let nn = x * x;
    if n > 500 {
        (S0 - S1 / nn) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / x
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / x
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// Log of the binomial point mass with explicit complement `q = 1 - p`.
fn ln_binom_raw(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if x > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if x == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let xf = x as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = LN_2PI + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

fn ln_hyper_raw(k: u64, succ: u64, fail: u64, draws: u64) -> f64 {
    let total = succ + fail;
    if k > succ || k > draws || draws - k > fail {
        return f64::NEG_INFINITY;
    }
    let p = draws as f64 / total as f64;
    let q = (total - draws) as f64 / total as f64;
    ln_binom_raw(k, succ, p, q) + ln_binom_raw(draws - k, fail, p, q)
        - ln_binom_raw(draws, total, p, q)
}

pub fn binom_pmf(k: i64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if k < 0 {
        return Ok(0.0);
    }
    Ok(ln_binom_raw(k as u64, n, p, 1.0 - p).exp())
}

fn binom_mode(n: u64, p: f64) -> u64 {
    (((n + 1) as f64 * p).floor() as u64).min(n)
}

/// Sum `pmf(i)` for `i = from, from-1, ..., lo`, stopping once the terms,
/// which decrease away from the mode, no longer affect the sum.
fn sum_down(pmf: impl Fn(u64) -> f64, from: u64, lo: u64) -> f64 {
    let mut sum = 0.0;
    let mut i = from;
    loop {
        let t = pmf(i);
        sum += t;
        if i == lo || t <= sum * 1e-17 {
            break;
        }
        i -= 1;
    }
    sum
}

fn sum_up(pmf: impl Fn(u64) -> f64, from: u64, hi: u64) -> f64 {
    let mut sum = 0.0;
    let mut i = from;
    loop {
        let t = pmf(i);
        sum += t;
        if i == hi || t <= sum * 1e-17 {
            break;
        }
        i += 1;
    }
    sum
}

/// `Pr(X <= k)` for `X ~ Bin(n, p)`.
pub fn binom_cdf(k: i64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if k < 0 {
        return Ok(0.0);
    }
    let k = k as u64;
    if k >= n {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let pmf = |i: u64| ln_binom_raw(i, n, p, q).exp();
    if k < binom_mode(n, p) {
        Ok(sum_down(pmf, k, 0).min(1.0))
    } else {
        Ok((1.0 - sum_up(pmf, k + 1, n)).max(0.0))
    }
}

/// Smallest `k` in `0..=n` with `binom_cdf(k) >= q`. `q = 0` gives 0 and
/// `q = 1` gives `n`.
pub fn binom_quantile(q: f64, n: u64, p: f64) -> Result<u64> {
    check_prob(q)?;
    check_prob(p)?;
    if q == 0.0 {
        return Ok(0);
    }
    if q == 1.0 {
        return Ok(n);
    }
    let target = q * QUANTILE_FUZZ;
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if binom_cdf(mid as i64, n, p)? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

fn check_hyper(succ: u64, fail: u64, draws: u64) -> Result<()> {
    if draws > succ + fail {
        return Err(Error::InvalidParams(format!(
            "draws {draws} exceed population {}",
            succ + fail
        )));
    }
    Ok(())
}

/// Support `[max(0, draws - fail), min(draws, succ)]` of the hypergeometric law.
pub fn hyper_support(succ: u64, fail: u64, draws: u64) -> (u64, u64) {
    (draws.saturating_sub(fail), draws.min(succ))
}

pub fn hyper_pmf(k: i64, succ: u64, fail: u64, draws: u64) -> Result<f64> {
    check_hyper(succ, fail, draws)?;
    if k < 0 {
        return Ok(0.0);
    }
    Ok(ln_hyper_raw(k as u64, succ, fail, draws).exp())
}

/// `Pr(X <= k)` for the number of successes among `draws` items drawn
/// without replacement from `succ` successes and `fail` failures.
pub fn hyper_cdf(k: i64, succ: u64, fail: u64, draws: u64) -> Result<f64> {
    check_hyper(succ, fail, draws)?;
    let (lo, hi) = hyper_support(succ, fail, draws);
    if k < lo as i64 {
        return Ok(0.0);
    }
    let k = k as u64;
    if k >= hi {
        return Ok(1.0);
    }
    let total = succ + fail;
    let mode = (((draws + 1) as f64 * (succ + 1) as f64 / (total + 2) as f64).floor() as u64)
        .clamp(lo, hi);
    let pmf = |i: u64| ln_hyper_raw(i, succ, fail, draws).exp();
    if k < mode {
        Ok(sum_down(pmf, k, lo).min(1.0))
    } else {
        Ok((1.0 - sum_up(pmf, k + 1, hi)).max(0.0))
    }
}

/// Smallest `k` in the support with `hyper_cdf(k) >= q`; `q = 0` maps to the
/// bottom of the support and `q = 1` to its top.
pub fn hyper_quantile(q: f64, succ: u64, fail: u64, draws: u64) -> Result<u64> {
    check_prob(q)?;
    check_hyper(succ, fail, draws)?;
    let (mut lo, mut hi) = hyper_support(succ, fail, draws);
    if q == 0.0 {
        return Ok(lo);
    }
    if q == 1.0 {
        return Ok(hi);
    }
    let target = q * QUANTILE_FUZZ;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if hyper_cdf(mid as i64, succ, fail, draws)? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Log point mass of the multivariate hypergeometric distribution.
pub fn mhyper_ln_pmf(counts: &[u64], params: &MHypParams) -> Result<LogWeight> {
    let pops = params.populations();
    if counts.len() != pops.len() {
        return Err(Error::InvalidParams(format!(
            "{} counts for {} populations",
            counts.len(),
            pops.len()
        )));
    }
    if counts.iter().sum::<u64>() != params.draws() {
        return Err(Error::InvalidParams("counts do not sum to draws".into()));
    }
    if let Some((c, n)) = counts.iter().zip(pops).find(|(c, n)| c > n) {
        return Err(Error::InvalidParams(format!(
            "count {c} exceeds population {n}"
        )));
    }
    let total = params.total();
    if total == 0 {
        return Ok(LogWeight::ONE);
    }
    // prod_l C(n_l, c_l) / C(total, draws) equals the same ratio of binomial
    // masses for any success probability; p = draws/total keeps every factor
    // near its mode.
    let draws = params.draws();
    let p = draws as f64 / total as f64;
    let q = (total - draws) as f64 / total as f64;
    let num: f64 = counts
        .iter()
        .zip(pops)
        .map(|(&c, &n)| ln_binom_raw(c, n, p, q))
        .sum();
    let ln = num - ln_binom_raw(draws, total, p, q);
    Ok(LogWeight(ln.min(0.0)))
}

pub fn mhyper_pmf(counts: &[u64], params: &MHypParams) -> Result<f64> {
    mhyper_ln_pmf(counts, params).map(LogWeight::prob)
}

/// Fill `out[j]` with the mass at `start + j`, anchored at `anchor` (the
/// point of `out` closest to the mode) and extended by the successive ratio
/// `ratio_up(x) = pmf(x + 1) / pmf(x)`.
fn fill_by_ratio(
    out: &mut [f64],
    start: u64,
    anchor: u64,
    anchor_val: f64,
    ratio_up: impl Fn(u64) -> f64,
) {
    let a = (anchor - start) as usize;
    out[a] = anchor_val;
    for j in a..out.len() - 1 {
        out[j + 1] = out[j] * ratio_up(start + j as u64);
    }
    for j in (1..=a).rev() {
        out[j - 1] = out[j] / ratio_up(start + j as u64 - 1);
    }
}

/// Binomial masses `Bin(d | n, p)` for `d = dmin..=dmin + out.len() - 1`
/// (all within `0..=n`).
pub(crate) fn binom_pmf_range(n: u64, p: f64, dmin: u64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let dmax = dmin + out.len() as u64 - 1;
    debug_assert!(dmax <= n);
    if p <= 0.0 || p >= 1.0 {
        let at = if p <= 0.0 { 0 } else { n };
        for (j, o) in out.iter_mut().enumerate() {
            *o = if dmin + j as u64 == at { 1.0 } else { 0.0 };
        }
        return;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let anchor = binom_mode(n, p).clamp(dmin, dmax);
    let val = ln_binom_raw(anchor, n, p, q).exp();
    fill_by_ratio(out, dmin, anchor, val, |d| {
        (n - d) as f64 / (d + 1) as f64 * odds
    });
}

/// Hypergeometric masses for `k = kmin..` (all within the support).
pub(crate) fn hyper_pmf_range(succ: u64, fail: u64, draws: u64, kmin: u64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let kmax = kmin + out.len() as u64 - 1;
    let total = succ + fail;
    let mode = if total == 0 {
        0
    } else {
        ((draws + 1) as f64 * (succ + 1) as f64 / (total + 2) as f64).floor() as u64
    };
    let anchor = mode.clamp(kmin, kmax);
    let val = ln_hyper_raw(anchor, succ, fail, draws).exp();
    fill_by_ratio(out, kmin, anchor, val, |k| {
        ((succ - k) * (draws - k)) as f64 / ((k + 1) * (fail + k + 1 - draws)) as f64
    });
}

/// Precomputed CDF of a discrete law over a contiguous support, used where
/// many CDF lookups and quantiles of the same distribution are needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    lo: u64,
    cdf: Vec<f64>,
}

impl CdfTable {
    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        check_prob(p)?;
        let q = 1.0 - p;
        let pmf: Vec<f64> = (0..=n).map(|k| ln_binom_raw(k, n, p, q).exp()).collect();
        Ok(Self::from_pmf(0, pmf))
    }

    pub fn hypergeometric(succ: u64, fail: u64, draws: u64) -> Result<Self> {
        check_hyper(succ, fail, draws)?;
        let (lo, hi) = hyper_support(succ, fail, draws);
        let pmf: Vec<f64> = (lo..=hi)
            .map(|k| ln_hyper_raw(k, succ, fail, draws).exp())
            .collect();
        Ok(Self::from_pmf(lo, pmf))
    }

    fn from_pmf(lo: u64, pmf: Vec<f64>) -> Self {
        let len = pmf.len();
        let mut upper = vec![0.0; len + 1];
        for j in (0..len).rev() {
            upper[j] = upper[j + 1] + pmf[j];
        }
        let mut cdf = Vec::with_capacity(len);
        let mut lower = 0.0;
        for j in 0..len {
            lower += pmf[j];
            let v = if lower < 0.5 {
                lower
            } else {
                1.0 - upper[j + 1]
            };
            cdf.push(v.clamp(0.0, 1.0));
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        CdfTable { lo, cdf }
    }

    pub fn support(&self) -> (u64, u64) {
        (self.lo, self.lo + self.cdf.len() as u64 - 1)
    }

    pub fn cdf(&self, k: i64) -> f64 {
        if k < self.lo as i64 {
            return 0.0;
        }
        let j = (k - self.lo as i64) as usize;
        self.cdf.get(j).copied().unwrap_or(1.0)
    }

    /// Same convention as [`binom_quantile`].
    pub fn quantile(&self, q: f64) -> u64 {
        let (lo, hi) = self.support();
        if q <= 0.0 {
            return lo;
        }
        if q >= 1.0 {
            return hi;
        }
        let target = q * QUANTILE_FUZZ;
        lo + self.cdf.partition_point(|&c| c < target) as u64
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.cdf
    }
}
