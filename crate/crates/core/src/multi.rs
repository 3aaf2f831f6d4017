//! Simultaneous bands for several chains compared through their joint ranks.
//!
//! Pooling `L` chains of `N` draws and ranking them jointly, the number of
//! chain-`l` draws among the `s_i = floor(z_i N L)` smallest is
//! hypergeometric, `Hyp(N, (L - 1) N, s_i)`, under the hypothesis that all
//! chains share one distribution. Bands are per-point quantiles of that law,
//! shared by all chains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::{
    self, check_alpha, check_gamma, check_replicates, CoverageModel, GammaMethod, GammaResult,
    Method, DEFAULT_MAX_ITER,
};
use crate::dist::{binom_pmf_range, hyper_pmf_range, hyper_support, CdfTable};
use crate::error::{Error, Result};
use crate::sampling::{map_replicates, replicate_rng};
use crate::single::{ConfidenceBands, Exceedance, DEFAULT_K_MAX};
use crate::transform::{
    default_grid, joint_ranks, ChainSet, EcdfTrajectory, EvaluationGrid, Resolution, TiePolicy,
};

/// Seed offset for the independent Monte Carlo coverage run that
/// accompanies simulated `gamma` when no exact recursion is available.
const COVERAGE_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Per-point bands shared by all chains; `draws` holds `s_i`.
pub type MultiBands = ConfidenceBands;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub inside: bool,
    pub exceedances: Vec<Exceedance>,
    pub trajectory: EcdfTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTestReport {
    /// True when every chain stays inside the bands.
    pub inside: bool,
    pub chains: Vec<ChainReport>,
    pub bands: MultiBands,
    pub gamma: GammaResult,
}

impl MultiTestReport {
    pub fn rejected_chains(&self) -> Vec<usize> {
        self.chains
            .iter()
            .filter(|c| !c.inside)
            .map(|c| c.chain)
            .collect()
    }
}

/// Dimension of the exact recursion's state: one coordinate per chain, less
/// the one fixed by the rank-sum constraint.
pub fn state_dimension(l: usize) -> Result<usize> {
    match l {
        2 | 3 => Ok(l - 1),
        _ => Err(Error::UnsupportedChainCount(l)),
    }
}

/// `s_i = floor(z_i N L)`; the small guard keeps grid points that are exact
/// multiples of `1 / (N L)` from rounding down.
pub fn pooled_draws(n: usize, l: usize, grid: &EvaluationGrid) -> Vec<u64> {
    let total = (n * l) as f64;
    grid.points()
        .iter()
        .map(|&z| (z * total + 1e-9).floor() as u64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct MultiSample {
    n: u64,
    l: usize,
    grid: EvaluationGrid,
    draws: Vec<u64>,
    tables: Vec<CdfTable>,
}

impl MultiSample {
    pub fn new(n: usize, l: usize, grid: EvaluationGrid) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 chains, got {l}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("chain length must be positive".into()));
        }
        let draws = pooled_draws(n, l, &grid);
        let nn = n as u64;
        let tables = draws
            .iter()
            .map(|&s| CdfTable::hypergeometric(nn, nn * (l as u64 - 1), s))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiSample {
            n: nn,
            l,
            grid,
            draws,
            tables,
        })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn chains(&self) -> usize {
        self.l
    }

    pub fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }

    pub fn draws(&self) -> &[u64] {
        &self.draws
    }

    pub fn interiors(&self, gamma: f64) -> Vec<(u64, u64)> {
        self.tables
            .iter()
            .map(|t| (t.quantile(gamma / 2.0), t.quantile(1.0 - gamma / 2.0)))
            .collect()
    }

    pub fn bands(&self, gamma: f64) -> MultiBands {
        let (lower_counts, upper_counts) = self.interiors(gamma).into_iter().unzip();
        ConfidenceBands {
            grid: self.grid.clone(),
            lower_counts,
            upper_counts,
            gamma,
            n: self.n as usize,
            chains: self.l,
            draws: self.draws.clone(),
        }
    }

    /// Exact simultaneous coverage; available for two and three chains.
    pub fn coverage(&self, gamma: f64) -> Result<f64> {
        let interiors = self.interiors(gamma);
        match self.l {
            2 => Ok(self.coverage_two(&interiors)),
            3 => Ok(self.coverage_three(&interiors)),
            l => Err(Error::UnsupportedChainCount(l)),
        }
    }

    /// One coordinate (chain 1's count `a`); chain 2 holds `s_i - a`.
    fn coverage_two(&self, interiors: &[(u64, u64)]) -> f64 {
        let n = self.n;
        let mut prev_lo = 0u64;
        let mut prev_s = 0u64;
        let mut mass = vec![1.0];
        let mut next = Vec::new();
        let mut pmf = Vec::new();
        for (i, (&(lo, hi), &s)) in interiors.iter().zip(&self.draws).enumerate() {
            let a_lo = lo.max(s.saturating_sub(hi));
            let a_hi = hi.min(s - lo);
            if a_lo > a_hi {
                return 0.0;
            }
            let t = s - prev_s;
            next.clear();
            next.resize((a_hi - a_lo + 1) as usize, 0.0);
            for (j, &w) in mass.iter().enumerate() {
                let a = prev_lo + j as u64;
                if w == 0.0 || a > a_hi {
                    continue;
                }
                let (succ, fail) = (n - a, n - (prev_s - a));
                let (klo, khi) = hyper_support(succ, fail, t);
                let dmin = klo.max(a_lo.saturating_sub(a));
                let dmax = khi.min(a_hi - a);
                if dmin > dmax {
                    continue;
                }
                pmf.clear();
                pmf.resize((dmax - dmin + 1) as usize, 0.0);
                hyper_pmf_range(succ, fail, t, dmin, &mut pmf);
                let base = (a + dmin - a_lo) as usize;
                for (slot, v) in next[base..].iter_mut().zip(&pmf) {
                    *slot += w * v;
                }
            }
            if i == 0 {
                // chains are exchangeable: keep a <= b, counting a < b twice
                for (j, slot) in next.iter_mut().enumerate() {
                    let a = a_lo + j as u64;
                    let b = s - a;
                    *slot *= match a.cmp(&b) {
                        std::cmp::Ordering::Less => 2.0,
                        std::cmp::Ordering::Equal => 1.0,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                }
            }
            std::mem::swap(&mut mass, &mut next);
            prev_lo = a_lo;
            prev_s = s;
        }
        mass.iter().sum::<f64>().min(1.0)
    }

    /// Two coordinates `(a, b)`; chain 3 holds `s_i - a - b`. Growth follows
    /// a multivariate hypergeometric law over the remaining ranks, evaluated
    /// as a product of binomial masses sharing `p = t / total`.
    fn coverage_three(&self, interiors: &[(u64, u64)]) -> f64 {
        let n = self.n;
        let mut prev_lo = 0u64;
        let mut prev_w = 1usize;
        let mut prev_s = 0u64;
        let mut mass = vec![1.0];
        let mut next = Vec::new();
        let (mut p1, mut p2, mut p3) = (Vec::new(), Vec::new(), Vec::new());

        // admissible growth d for a chain at count x with pop remaining ranks
        let range = |x: u64, pop: u64, t: u64, lo: u64, hi: u64| -> Option<(u64, u64)> {
            if x > hi {
                return None;
            }
            let dmin = lo.saturating_sub(x);
            let dmax = (hi - x).min(pop).min(t);
            (dmin <= dmax).then_some((dmin, dmax))
        };

        for (i, (&(lo, hi), &s)) in interiors.iter().zip(&self.draws).enumerate() {
            let w = (hi - lo + 1) as usize;
            let t = s - prev_s;
            let total = 3 * n - prev_s;
            let p = if total == 0 {
                0.0
            } else {
                t as f64 / total as f64
            };
            let denom = {
                let mut d = [0.0];
                binom_pmf_range(total, p, t, &mut d);
                d[0]
            };
            next.clear();
            next.resize(w * w, 0.0);
            for ia in 0..prev_w {
                for ib in 0..prev_w {
                    let wt = mass[ia * prev_w + ib];
                    if wt == 0.0 {
                        continue;
                    }
                    let a = prev_lo + ia as u64;
                    let b = prev_lo + ib as u64;
                    let c = prev_s - a - b;
                    let (pa, pb, pc) = (n - a, n - b, n - c);
                    let (Some(r1), Some(r2), Some(r3)) = (
                        range(a, pa, t, lo, hi),
                        range(b, pb, t, lo, hi),
                        range(c, pc, t, lo, hi),
                    ) else {
                        continue;
                    };
                    for (v, pop, r) in [(&mut p1, pa, r1), (&mut p2, pb, r2), (&mut p3, pc, r3)] {
                        v.clear();
                        v.resize((r.1 - r.0 + 1) as usize, 0.0);
                        binom_pmf_range(pop, p, r.0, v);
                    }
                    let scale = wt / denom;
                    for d1 in r1.0..=r1.1 {
                        let m1 = scale * p1[(d1 - r1.0) as usize];
                        let row = (a + d1 - lo) as usize * w;
                        for d2 in r2.0..=r2.1.min(t - d1) {
                            let d3 = t - d1 - d2;
                            if d3 < r3.0 || d3 > r3.1 {
                                continue;
                            }
                            next[row + (b + d2 - lo) as usize] +=
                                m1 * p2[(d2 - r2.0) as usize] * p3[(d3 - r3.0) as usize];
                        }
                    }
                }
            }
            if i == 0 {
                // keep a <= b <= c, weighted by the number of distinct orderings
                for ia in 0..w {
                    for ib in 0..w {
                        let a = lo + ia as u64;
                        let b = lo + ib as u64;
                        let slot = &mut next[ia * w + ib];
                        if *slot == 0.0 {
                            continue;
                        }
                        let c = s - a - b;
                        *slot *= if a > b || b > c {
                            0.0
                        } else if a == b && b == c {
                            1.0
                        } else if a == b || b == c {
                            3.0
                        } else {
                            6.0
                        };
                    }
                }
            }
            std::mem::swap(&mut mass, &mut next);
            prev_lo = lo;
            prev_w = w;
            prev_s = s;
        }
        mass.iter().sum::<f64>().min(1.0)
    }

    /// Per-chain scaled ECDF counts `#{ranks of chain l <= s_i}` from the
    /// chain label of each pooled rank position (`labels[r - 1]` is the
    /// chain holding rank `r`).
    pub fn counts_from_labels(&self, labels: &[usize]) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.draws.len()]; self.l];
        let mut running = vec![0u64; self.l];
        let mut pos = 0usize;
        for (i, &s) in self.draws.iter().enumerate() {
            while pos < s as usize {
                running[labels[pos]] += 1;
                pos += 1;
            }
            for (chain, c) in counts.iter_mut().enumerate() {
                c[i] = running[chain];
            }
        }
        counts
    }

    /// Per-chain counts from integer joint ranks (`1..=L N`).
    pub fn counts_from_ranks(&self, ranks: &[Vec<u64>]) -> Vec<Vec<u64>> {
        ranks
            .iter()
            .map(|r| {
                let mut sorted = r.clone();
                sorted.sort_unstable();
                self.draws
                    .iter()
                    .map(|&s| sorted.partition_point(|&x| x <= s) as u64)
                    .collect()
            })
            .collect()
    }

    fn simulate_labels<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.n as usize;
        let mut pooled: Vec<(f64, usize)> = (0..self.l * n)
            .map(|k| (rng.random::<f64>(), k / n))
            .collect();
        pooled.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
        pooled.into_iter().map(|(_, chain)| chain).collect()
    }

    pub fn trajectory_gamma(&self, counts: &[Vec<u64>]) -> f64 {
        let mut g = f64::INFINITY;
        for chain in counts {
            for (t, &c) in self.tables.iter().zip(chain) {
                let c = c as i64;
                g = g.min(t.cdf(c)).min(1.0 - t.cdf(c - 1));
            }
        }
        2.0 * g
    }

    /// Fraction of simulated same-distribution replicates whose chains all
    /// stay inside the bands for `gamma`.
    pub fn monte_carlo_coverage(&self, gamma: f64, replicates: usize, seed: u64) -> f64 {
        let bands = self.bands(gamma);
        let hits = map_replicates(replicates, |m| {
            let mut rng = replicate_rng(seed, m as u64);
            let counts = self.counts_from_labels(&self.simulate_labels(&mut rng));
            counts.iter().all(|c| bands.contains(c))
        });
        hits.iter().filter(|&&h| h).count() as f64 / replicates as f64
    }

    /// Simulated `gamma`. Attained coverage is exact for two or three
    /// chains and a fresh Monte Carlo estimate otherwise.
    pub fn simulate_gamma(&self, alpha: f64, replicates: usize, seed: u64) -> Result<GammaResult> {
        check_alpha(alpha)?;
        check_replicates(replicates)?;
        let per_replicate = map_replicates(replicates, |m| {
            let mut rng = replicate_rng(seed, m as u64);
            let counts = self.counts_from_labels(&self.simulate_labels(&mut rng));
            let g = self.trajectory_gamma(&counts);
            assert!(g > 0.0, "minimal pointwise level must be positive");
            g
        });
        let gamma = adjust::gamma_from_replicates(per_replicate, alpha);
        let attained_coverage = match self.coverage(gamma) {
            Ok(c) => c,
            Err(_) => self.monte_carlo_coverage(
                gamma,
                replicates,
                seed.wrapping_add(COVERAGE_SEED_OFFSET),
            ),
        };
        Ok(GammaResult {
            gamma,
            attained_coverage,
            method: GammaMethod::Simulation,
            iterations: replicates,
        })
    }

    pub fn optimize_gamma(&self, alpha: f64, tol: f64) -> Result<GammaResult> {
        state_dimension(self.l)?;
        adjust::optimize_gamma(self, alpha, tol, DEFAULT_MAX_ITER)
    }

    pub fn resolve(&self, alpha: f64, method: &Method) -> Result<GammaResult> {
        match method {
            Method::Optimize { tol } => self.optimize_gamma(alpha, *tol),
            Method::Simulate { replicates, seed } => self.simulate_gamma(alpha, *replicates, *seed),
            Method::Fixed(g) => {
                check_gamma(g.gamma)?;
                let mut g = g.clone();
                if g.method == GammaMethod::Interpolated {
                    if let Ok(c) = self.coverage(g.gamma) {
                        g.attained_coverage = c;
                    }
                }
                Ok(g)
            }
        }
    }
}

impl CoverageModel for MultiSample {
    fn coverage(&self, gamma: f64) -> f64 {
        MultiSample::coverage(self, gamma).expect("exact coverage needs two or three chains")
    }

    fn breakpoints(&self, alpha: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for t in &self.tables {
            adjust::push_breakpoints(t.values(), alpha, &mut out);
        }
        out
    }
}

/// Default grid for `L` chains of length `N`: points on the `1 / (L N)`
/// lattice of joint fractional ranks.
pub fn default_multi_grid(n: usize, l: usize) -> Result<EvaluationGrid> {
    default_grid(n, Resolution::Discrete((n * l) as u64), DEFAULT_K_MAX)
}

pub fn gamma_simulate_multi(
    n: usize,
    l: usize,
    grid: &EvaluationGrid,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<GammaResult> {
    MultiSample::new(n, l, grid.clone())?.simulate_gamma(alpha, replicates, seed)
}

pub fn coverage_probability_multi(
    n: usize,
    l: usize,
    grid: &EvaluationGrid,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    state_dimension(l)?;
    MultiSample::new(n, l, grid.clone())?.coverage(gamma)
}

pub fn gamma_optimize_multi(
    n: usize,
    l: usize,
    grid: &EvaluationGrid,
    alpha: f64,
    tol: f64,
) -> Result<GammaResult> {
    state_dimension(l)?;
    MultiSample::new(n, l, grid.clone())?.optimize_gamma(alpha, tol)
}

pub fn bands_from_gamma_multi(
    n: usize,
    l: usize,
    grid: &EvaluationGrid,
    gamma: f64,
) -> Result<MultiBands> {
    check_gamma(gamma)?;
    Ok(MultiSample::new(n, l, grid.clone())?.bands(gamma))
}

/// Jointly rank the chains and test every chain's ECDF against the shared
/// bands.
pub fn test_multi(
    chains: &ChainSet,
    alpha: f64,
    method: &Method,
    grid: Option<EvaluationGrid>,
    tie_policy: TiePolicy,
) -> Result<MultiTestReport> {
    check_alpha(alpha)?;
    let (n, l) = (chains.len(), chains.num_chains());
    let grid = match grid {
        Some(g) => g,
        None => default_multi_grid(n, l)?,
    };
    let model = MultiSample::new(n, l, grid)?;
    let gamma = model.resolve(alpha, method)?;
    let bands = model.bands(gamma.gamma);
    let ranks = joint_ranks(chains, tie_policy);
    let mut reports = Vec::with_capacity(l);
    for (chain, counts) in model.counts_from_ranks(&ranks).into_iter().enumerate() {
        let trajectory = EcdfTrajectory::from_counts(model.grid().clone(), counts, n)?;
        let exceedances = bands.exceedances(chain, &trajectory);
        reports.push(ChainReport {
            chain,
            inside: exceedances.is_empty(),
            exceedances,
            trajectory,
        });
    }
    Ok(MultiTestReport {
        inside: reports.iter().all(|r| r.inside),
        chains: reports,
        bands,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn state_dimensions() {
        assert_eq!(state_dimension(2).unwrap(), 1);
        assert_eq!(state_dimension(3).unwrap(), 2);
        assert!(matches!(
            state_dimension(4),
            Err(Error::UnsupportedChainCount(4))
        ));
    }

    #[test]
    fn gamma_zero_covers_everything() {
        let g = EvaluationGrid::uniform(6).unwrap();
        for l in [2, 3] {
            assert_abs_diff_eq!(
                coverage_probability_multi(6, l, &g, 0.0).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
        assert!(coverage_probability_multi(6, 4, &g, 0.1).is_err());
    }

    #[test]
    fn band_examples() {
        let b = bands_from_gamma_multi(2, 2, &EvaluationGrid::new(vec![0.5, 1.0]).unwrap(), 1.0)
            .unwrap();
        assert_eq!(b.draws, vec![2, 4]);
        assert_eq!(b.lower_counts, vec![1, 2]);
        assert_eq!(b.upper_counts, vec![1, 2]);
        assert_eq!(b.lower()[1], 1.0);
    }

    #[test]
    fn bounds_inside_support() {
        let (n, l) = (7, 3);
        let m = MultiSample::new(n, l, EvaluationGrid::uniform(10).unwrap()).unwrap();
        let b = m.bands(0.3);
        for (i, &s) in m.draws().iter().enumerate() {
            let min = s.saturating_sub(((l - 1) * n) as u64);
            let max = s.min(n as u64);
            assert!(min <= b.lower_counts[i] && b.upper_counts[i] <= max);
        }
    }

    #[test]
    fn coverage_is_monotone() {
        let m = MultiSample::new(12, 3, EvaluationGrid::uniform(9).unwrap()).unwrap();
        let mut prev = 1.0;
        for k in 0..=20 {
            let c = m.coverage(0.1 * k as f64 / 20.0).unwrap();
            assert!(c <= prev + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn copies_are_inside() {
        let chain: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let set = ChainSet::new(vec![chain.clone(), chain]).unwrap();
        let r = test_multi(
            &set,
            0.05,
            &Method::default(),
            None,
            TiePolicy::Deterministic,
        )
        .unwrap();
        assert!(r.inside);
    }

    #[test]
    fn counts_sum_to_draws() {
        let m = MultiSample::new(5, 3, EvaluationGrid::uniform(5).unwrap()).unwrap();
        let mut rng = replicate_rng(1, 0);
        let counts = m.counts_from_labels(&m.simulate_labels(&mut rng));
        for (i, &s) in m.draws().iter().enumerate() {
            assert_eq!(counts.iter().map(|c| c[i]).sum::<u64>(), s);
        }
    }
}
