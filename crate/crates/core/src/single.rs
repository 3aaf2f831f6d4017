//! Simultaneous bands for the ECDF of a single sample of PIT values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::{
    self, check_alpha, check_gamma, check_replicates, CoverageModel, GammaMethod, GammaResult,
    Method, DEFAULT_MAX_ITER,
};
use crate::dist::{binom_pmf_range, CdfTable};
use crate::error::{Error, Result};
use crate::sampling::{map_replicates, replicate_rng};
use crate::transform::{default_grid, ecdf_eval_pit, EcdfTrajectory, EvaluationGrid, PitValues};

pub const DEFAULT_K_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

/// A grid point where an ECDF leaves the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub chain: usize,
    pub index: usize,
    pub z: f64,
    pub observed: f64,
    pub bound: f64,
    pub side: Side,
}

/// Per-point ECDF limits. Counts are on the scaled-ECDF axis `N F(z_i)`;
/// [`lower`](Self::lower) and [`upper`](Self::upper) divide by `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands {
    pub grid: EvaluationGrid,
    pub lower_counts: Vec<u64>,
    pub upper_counts: Vec<u64>,
    pub gamma: f64,
    pub n: usize,
    pub chains: usize,
    /// Pooled draw counts `s_i` for multi-chain bands; empty for one sample.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub draws: Vec<u64>,
}

impl ConfidenceBands {
    pub fn lower(&self) -> Vec<f64> {
        self.scale(&self.lower_counts)
    }

    pub fn upper(&self) -> Vec<f64> {
        self.scale(&self.upper_counts)
    }

    fn scale(&self, counts: &[u64]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    /// Borders count as inside.
    pub fn contains(&self, counts: &[u64]) -> bool {
        counts
            .iter()
            .zip(self.lower_counts.iter().zip(&self.upper_counts))
            .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub fn exceedances(&self, chain: usize, trajectory: &EcdfTrajectory) -> Vec<Exceedance> {
        let n = self.n as f64;
        let mut out = Vec::new();
        for (i, &c) in trajectory.counts().iter().enumerate() {
            let (lo, hi) = (self.lower_counts[i], self.upper_counts[i]);
            let side = if c < lo {
                Some((Side::Below, lo))
            } else if c > hi {
                Some((Side::Above, hi))
            } else {
                None
            };
            if let Some((side, bound)) = side {
                out.push(Exceedance {
                    chain,
                    index: i,
                    z: self.grid.points()[i],
                    observed: c as f64 / n,
                    bound: bound as f64 / n,
                    side,
                });
            }
        }
        out
    }

    pub fn check_grid(&self, trajectory: &EcdfTrajectory) -> Result<()> {
        if trajectory.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "trajectory and bands use different grids".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub inside: bool,
    pub exceedances: Vec<Exceedance>,
    pub bands: ConfidenceBands,
    pub trajectory: EcdfTrajectory,
    pub gamma: GammaResult,
}

/// Marginal laws `N F(z_i) ~ Bin(N, z_i)` and the conditional growth
/// probabilities of the scaled ECDF for one `(N, grid)` pair. Building this
/// once and reusing it avoids recomputing the tables for every `gamma`.
#[derive(Debug, Clone)]
pub struct SingleSample {
    n: u64,
    grid: EvaluationGrid,
    tables: Vec<CdfTable>,
    growth: Vec<f64>,
}

impl SingleSample {
    pub fn new(n: usize, grid: EvaluationGrid) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        let n = n as u64;
        let tables = grid
            .points()
            .iter()
            .map(|&z| CdfTable::binomial(n, z))
            .collect::<Result<Vec<_>>>()?;
        let mut prev = 0.0;
        let growth = grid
            .points()
            .iter()
            .map(|&z| {
                let g = ((z - prev) / (1.0 - prev)).clamp(0.0, 1.0);
                prev = z;
                g
            })
            .collect();
        Ok(SingleSample {
            n,
            grid,
            tables,
            growth,
        })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }

    /// Scaled interiors `I_i(gamma)` as inclusive count ranges.
    pub fn interiors(&self, gamma: f64) -> Vec<(u64, u64)> {
        self.tables
            .iter()
            .map(|t| (t.quantile(gamma / 2.0), t.quantile(1.0 - gamma / 2.0)))
            .collect()
    }

    /// Probability that a uniform sample's scaled ECDF stays inside the
    /// given count ranges at every grid point.
    pub fn coverage_of(&self, interiors: &[(u64, u64)]) -> f64 {
        let n = self.n;
        let mut offset = 0u64;
        let mut mass = vec![1.0];
        let mut next = Vec::new();
        let mut pmf = Vec::new();
        for (&(lo, hi), &p) in interiors.iter().zip(&self.growth) {
            next.clear();
            next.resize((hi - lo + 1) as usize, 0.0);
            for (j, &w) in mass.iter().enumerate() {
                let r = offset + j as u64;
                if r > hi {
                    break;
                }
                if w == 0.0 {
                    continue;
                }
                let dmin = lo.saturating_sub(r);
                let dmax = (hi - r).min(n - r);
                if dmin > dmax {
                    continue;
                }
                pmf.clear();
                pmf.resize((dmax - dmin + 1) as usize, 0.0);
                binom_pmf_range(n - r, p, dmin, &mut pmf);
                let base = (r + dmin - lo) as usize;
                for (slot, v) in next[base..].iter_mut().zip(&pmf) {
                    *slot += w * v;
                }
            }
            std::mem::swap(&mut mass, &mut next);
            offset = lo;
        }
        mass.iter().sum::<f64>().min(1.0)
    }

    pub fn coverage(&self, gamma: f64) -> f64 {
        self.coverage_of(&self.interiors(gamma))
    }

    /// Smallest two-tail level at which the trajectory touches a band.
    pub fn trajectory_gamma(&self, counts: &[u64]) -> f64 {
        let mut g = f64::INFINITY;
        for (t, &c) in self.tables.iter().zip(counts) {
            let c = c as i64;
            g = g.min(t.cdf(c)).min(1.0 - t.cdf(c - 1));
        }
        2.0 * g
    }

    pub fn bands(&self, gamma: f64) -> ConfidenceBands {
        let (lower_counts, upper_counts) = self.interiors(gamma).into_iter().unzip();
        ConfidenceBands {
            grid: self.grid.clone(),
            lower_counts,
            upper_counts,
            gamma,
            n: self.n as usize,
            chains: 1,
            draws: Vec::new(),
        }
    }

    pub fn simulate_gamma(&self, alpha: f64, replicates: usize, seed: u64) -> Result<GammaResult> {
        check_alpha(alpha)?;
        check_replicates(replicates)?;
        let n = self.n as usize;
        let points = self.grid.points();
        let per_replicate = map_replicates(replicates, |m| {
            let mut rng = replicate_rng(seed, m as u64);
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_unstable_by(f64::total_cmp);
            let counts: Vec<u64> = points
                .iter()
                .map(|&z| u.partition_point(|&v| v <= z) as u64)
                .collect();
            let g = self.trajectory_gamma(&counts);
            assert!(g > 0.0, "minimal pointwise level must be positive");
            g
        });
        let gamma = adjust::gamma_from_replicates(per_replicate, alpha);
        Ok(GammaResult {
            gamma,
            attained_coverage: self.coverage(gamma),
            method: GammaMethod::Simulation,
            iterations: replicates,
        })
    }

    pub fn optimize_gamma(&self, alpha: f64, tol: f64) -> Result<GammaResult> {
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
                    g.attained_coverage = self.coverage(g.gamma);
                }
                Ok(g)
            }
        }
    }
}

impl CoverageModel for SingleSample {
    fn coverage(&self, gamma: f64) -> f64 {
        SingleSample::coverage(self, gamma)
    }

    fn breakpoints(&self, alpha: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for t in &self.tables {
            adjust::push_breakpoints(t.values(), alpha, &mut out);
        }
        out
    }
}

pub fn coverage_probability(n: usize, grid: &EvaluationGrid, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(SingleSample::new(n, grid.clone())?.coverage(gamma))
}

pub fn gamma_simulate(
    n: usize,
    grid: &EvaluationGrid,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<GammaResult> {
    SingleSample::new(n, grid.clone())?.simulate_gamma(alpha, replicates, seed)
}

pub fn gamma_optimize(
    n: usize,
    grid: &EvaluationGrid,
    alpha: f64,
    tol: f64,
) -> Result<GammaResult> {
    SingleSample::new(n, grid.clone())?.optimize_gamma(alpha, tol)
}

pub fn bands_from_gamma(n: usize, grid: &EvaluationGrid, gamma: f64) -> Result<ConfidenceBands> {
    check_gamma(gamma)?;
    Ok(SingleSample::new(n, grid.clone())?.bands(gamma))
}

/// Test uniformity of PIT values. Discrete values are first moved to the
/// rank scale (see [`PitValues::to_rank_scale`]); without an explicit grid
/// the default equally spaced grid for that resolution is used.
pub fn test_single(
    u: &PitValues,
    alpha: f64,
    method: &Method,
    grid: Option<EvaluationGrid>,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let u = u.to_rank_scale();
    let grid = match grid {
        Some(g) => g,
        None => default_grid(u.len(), u.resolution(), DEFAULT_K_MAX)?,
    };
    let model = SingleSample::new(u.len(), grid)?;
    let gamma = model.resolve(alpha, method)?;
    let bands = model.bands(gamma.gamma);
    let trajectory = ecdf_eval_pit(&u, model.grid());
    let exceedances = bands.exceedances(0, &trajectory);
    Ok(TestReport {
        inside: exceedances.is_empty(),
        exceedances,
        bands,
        trajectory,
        gamma,
    })
}
