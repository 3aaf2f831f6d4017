//! Data pipeline feeding the tests: probability integral transform values,
//! fractional ranks, joint cross-chain ranks, evaluation grids and ECDFs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `L` equal-length sequences of finite draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    chains: Vec<Vec<f64>>,
}

impl ChainSet {
    pub fn new(chains: Vec<Vec<f64>>) -> Result<Self> {
        let first = chains
            .first()
            .ok_or_else(|| Error::InvalidInput("no chains".into()))?
            .len();
        if first == 0 {
            return Err(Error::InvalidInput("empty chain".into()));
        }
        for c in &chains {
            if c.len() != first {
                return Err(Error::UnequalChainLengths(first, c.len()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite draw".into()));
            }
        }
        Ok(ChainSet { chains })
    }

    pub fn single(draws: Vec<f64>) -> Result<Self> {
        Self::new(vec![draws])
    }

    /// Number of chains `L`.
    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    /// Draws per chain `N`.
    pub fn len(&self) -> usize {
        self.chains[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn chains(&self) -> &[Vec<f64>] {
        &self.chains
    }

    pub fn chain(&self, l: usize) -> &[f64] {
        &self.chains[l]
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.chains
    }

    pub fn map_chain(&mut self, l: usize, f: impl Fn(f64) -> f64) {
        for v in &mut self.chains[l] {
            *v = f(*v);
        }
    }
}

/// Granularity of PIT values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Continuous,
    /// Values on `{0, 1/S, ..., 1}` with `S` the denominator.
    Discrete(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitValues {
    values: Vec<f64>,
    resolution: Resolution,
}

impl PitValues {
    pub fn continuous(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("no PIT values".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("PIT value {v} outside [0, 1]")));
        }
        Ok(PitValues {
            values,
            resolution: Resolution::Continuous,
        })
    }

    /// Values must be multiples of `1/s` (up to rounding).
    pub fn discrete(values: Vec<f64>, s: u64) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidInput("resolution must be positive".into()));
        }
        let mut pit = Self::continuous(values)?;
        for v in &mut pit.values {
            let level = (*v * s as f64).round();
            if (level - *v * s as f64).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "{v} is not a multiple of 1/{s}"
                )));
            }
            *v = level / s as f64;
        }
        pit.resolution = Resolution::Discrete(s);
        Ok(pit)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Map discrete values `j/S` to `(j + 1)/(S + 1)`.
    ///
    /// An empirical PIT against `S` comparison draws is uniform over the
    /// `S + 1` levels `{0, ..., S}/S`, so `Pr(u <= j/S) = (j + 1)/(S + 1)`.
    /// After this shift the values are uniform on `{1, ..., S + 1}/(S + 1)`
    /// and `Pr(u <= z) = z` for every multiple `z` of `1/(S + 1)`, which is
    /// what the binomial band construction requires. Continuous values are
    /// returned unchanged.
    pub fn to_rank_scale(&self) -> PitValues {
        match self.resolution {
            Resolution::Continuous => self.clone(),
            Resolution::Discrete(s) => {
                let values = self
                    .values
                    .iter()
                    .map(|v| ((v * s as f64).round() + 1.0) / (s + 1) as f64)
                    .collect();
                PitValues {
                    values,
                    resolution: Resolution::Discrete(s + 1),
                }
            }
        }
    }
}

/// Strictly increasing evaluation points in `(0, 1]`; `z_0 = 0` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    points: Vec<f64>,
}

impl EvaluationGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("evaluation grid is empty".into()));
        }
        if points.iter().any(|&z| !(z > 0.0 && z <= 1.0)) {
            return Err(Error::InvalidInput("grid points must lie in (0, 1]".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(EvaluationGrid { points })
    }

    /// `K` equally spaced points `i/K`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("grid size must be positive".into()));
        }
        Self::new((1..=k).map(|i| i as f64 / k as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Scaled ECDF `r_i = N F(z_i)` at the grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfTrajectory {
    grid: EvaluationGrid,
    counts: Vec<u64>,
    n: usize,
}

impl EcdfTrajectory {
    pub fn from_counts(grid: EvaluationGrid, counts: Vec<u64>, n: usize) -> Result<Self> {
        if counts.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} counts for {} grid points",
                counts.len(),
                grid.len()
            )));
        }
        if counts.windows(2).any(|w| w[0] > w[1]) || counts.iter().any(|&c| c as usize > n) {
            return Err(Error::InvalidInput(
                "counts must be nondecreasing and <= N".into(),
            ));
        }
        Ok(EcdfTrajectory { grid, counts, n })
    }

    pub fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `F(z_i) = r_i / N`.
    pub fn values(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Ties ordered by chain index, then by position within the chain.
    #[default]
    Deterministic,
    /// Ties ordered uniformly at random from the given seed.
    Random(u64),
}

/// `u_i = (1/S) sum_j 1[x^i_j <= y_i]`.
pub fn empirical_pit(y: &[f64], comparison: &[Vec<f64>]) -> Result<PitValues> {
    if y.len() != comparison.len() {
        return Err(Error::InvalidInput(format!(
            "{} draws but {} comparison samples",
            y.len(),
            comparison.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("no draws".into()));
    }
    let s = comparison[0].len();
    let mut values = Vec::with_capacity(y.len());
    for (i, (yi, xi)) in y.iter().zip(comparison).enumerate() {
        if xi.is_empty() {
            return Err(Error::EmptyComparison { index: i });
        }
        if xi.len() != s {
            return Err(Error::InvalidInput(format!(
                "comparison sample {i} has {} draws, expected {s}",
                xi.len()
            )));
        }
        let below = xi.iter().filter(|&&x| x <= *yi).count();
        values.push(below as f64 / s as f64);
    }
    PitValues::discrete(values, s as u64)
}

fn total_cmp_idx(y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    idx
}

/// `r_i = (1/N) sum_j 1[y_j <= y_i]`; tied values share the largest count.
pub fn fractional_ranks(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let idx = total_cmp_idx(y);
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[idx[end]] == y[idx[start]] {
            end += 1;
        }
        for &i in &idx[start..end] {
            out[i] = end as f64 / n as f64;
        }
        start = end;
    }
    out
}

/// Integer ranks `1..=L*N` of every draw within the pooled sample, returned
/// per chain. Ties are broken according to `tie_policy`, so the ranks are
/// always a permutation of `1..=L*N`.
pub fn joint_ranks(chains: &ChainSet, tie_policy: TiePolicy) -> Vec<Vec<u64>> {
    let n = chains.len();
    let l = chains.num_chains();
    let mut pooled: Vec<(f64, u64, usize, usize)> = Vec::with_capacity(n * l);
    let mut rng = match tie_policy {
        TiePolicy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        TiePolicy::Deterministic => None,
    };
    for (c, chain) in chains.chains().iter().enumerate() {
        for (j, &v) in chain.iter().enumerate() {
            let key = rng.as_mut().map_or(0, |r| r.random::<u64>());
            pooled.push((v, key, c, j));
        }
    }
    pooled.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut ranks = vec![vec![0u64; n]; l];
    for (r, &(_, _, c, j)) in pooled.iter().enumerate() {
        ranks[c][j] = r as u64 + 1;
    }
    ranks
}

/// Fractional ranks `R(u_lj | u) / (L N)` over the pooled chains.
pub fn joint_fractional_ranks(chains: &ChainSet, tie_policy: TiePolicy) -> Result<Vec<Vec<f64>>> {
    if chains.num_chains() < 2 {
        return Err(Error::InvalidInput(
            "joint ranks need at least two chains".into(),
        ));
    }
    let total = (chains.len() * chains.num_chains()) as f64;
    Ok(joint_ranks(chains, tie_policy)
        .into_iter()
        .map(|c| c.into_iter().map(|r| r as f64 / total).collect())
        .collect())
}

/// Counts `r_i = sum_j 1[u_j <= z_i]` at each grid point.
pub fn ecdf_eval(u: &[f64], grid: &EvaluationGrid) -> EcdfTrajectory {
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let counts = grid
        .points()
        .iter()
        .map(|&z| sorted.partition_point(|&v| v <= z) as u64)
        .collect();
    EcdfTrajectory {
        grid: grid.clone(),
        counts,
        n: u.len(),
    }
}

/// ECDF of PIT values; discrete values are compared on their integer levels
/// so grid points that are multiples of `1/S` are matched exactly.
pub fn ecdf_eval_pit(u: &PitValues, grid: &EvaluationGrid) -> EcdfTrajectory {
    match u.resolution() {
        Resolution::Continuous => ecdf_eval(u.values(), grid),
        Resolution::Discrete(s) => {
            let sf = s as f64;
            let mut levels: Vec<u64> = u.values().iter().map(|v| (v * sf).round() as u64).collect();
            levels.sort_unstable();
            let counts = grid
                .points()
                .iter()
                .map(|&z| {
                    let cut = (z * sf + 1e-9).floor() as u64;
                    levels.partition_point(|&lv| lv <= cut) as u64
                })
                .collect();
            EcdfTrajectory {
                grid: grid.clone(),
                counts,
                n: u.len(),
            }
        }
    }
}

/// Equally spaced grid of `K = min(N, S, K_max)` points; for discrete
/// resolutions `K` is reduced to the largest divisor of `S` so that every
/// point is a multiple of `1/S`.
pub fn default_grid(n: usize, resolution: Resolution, k_max: usize) -> Result<EvaluationGrid> {
    if n == 0 || k_max == 0 {
        return Err(Error::InvalidInput("N and K_max must be positive".into()));
    }
    let k = match resolution {
        Resolution::Continuous => n.min(k_max),
        Resolution::Discrete(s) => {
            let s = s as usize;
            let cap = n.min(k_max).min(s);
            (1..=cap).rev().find(|d| s.is_multiple_of(*d)).unwrap_or(1)
        }
    };
    EvaluationGrid::uniform(k)
}

/// Grid at the ordered fractional ranks of a sample (duplicates removed).
pub fn fractional_rank_grid(y: &[f64]) -> Result<EvaluationGrid> {
    let mut r = fractional_ranks(y);
    r.sort_by(f64::total_cmp);
    r.dedup();
    EvaluationGrid::new(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empirical_pit_examples() {
        let u = empirical_pit(&[0.0], &[vec![-1.0, 1.0]]).unwrap();
        assert_eq!(u.values(), &[0.5]);
        assert_eq!(u.resolution(), Resolution::Discrete(2));
        let u = empirical_pit(&[5.0], &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(u.values(), &[1.0]);
        let u = empirical_pit(&[0.3], &[vec![0.1, 0.2, 0.4, 0.9]]).unwrap();
        assert_eq!(u.values(), &[0.5]);
        assert!(matches!(
            empirical_pit(&[0.3], &[vec![]]),
            Err(Error::EmptyComparison { index: 0 })
        ));
    }

    #[test]
    fn fractional_rank_examples() {
        let r = fractional_ranks(&[3.0, 1.0, 2.0]);
        assert_abs_diff_eq!(r[0], 1.0);
        assert_abs_diff_eq!(r[1], 1.0 / 3.0);
        assert_abs_diff_eq!(r[2], 2.0 / 3.0);
        let r = fractional_ranks(&[1.0, 1.0, 2.0]);
        assert_eq!(r, vec![2.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(fractional_ranks(&[5.0]), vec![1.0]);
    }

    #[test]
    fn joint_rank_examples() {
        let cs = ChainSet::new(vec![vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        let r = joint_fractional_ranks(&cs, TiePolicy::Deterministic).unwrap();
        assert_eq!(r, vec![vec![0.25, 0.75], vec![0.5, 1.0]]);

        let cs = ChainSet::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = joint_fractional_ranks(&cs, TiePolicy::Deterministic).unwrap();
        let mut all: Vec<f64> = r.concat();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vec![0.25, 0.5, 0.75, 1.0]);

        let cs = ChainSet::new(vec![vec![7.0], vec![9.0]]).unwrap();
        let r = joint_fractional_ranks(&cs, TiePolicy::Deterministic).unwrap();
        assert_eq!(r, vec![vec![0.5], vec![1.0]]);
    }

    #[test]
    fn random_ties_are_seeded() {
        let cs = ChainSet::new(vec![vec![1.0; 5], vec![1.0; 5]]).unwrap();
        let a = joint_ranks(&cs, TiePolicy::Random(3));
        let b = joint_ranks(&cs, TiePolicy::Random(3));
        assert_eq!(a, b);
        let mut all = a.concat();
        all.sort_unstable();
        assert_eq!(all, (1..=10).collect::<Vec<u64>>());
    }

    #[test]
    fn unequal_chains_rejected() {
        assert!(matches!(
            ChainSet::new(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(Error::UnequalChainLengths(2, 1))
        ));
        let one = ChainSet::single(vec![1.0]).unwrap();
        assert!(joint_fractional_ranks(&one, TiePolicy::Deterministic).is_err());
    }

    #[test]
    fn ecdf_examples() {
        let g = EvaluationGrid::new(vec![0.5, 1.0]).unwrap();
        assert_eq!(ecdf_eval(&[0.2, 0.8], &g).counts(), &[1, 2]);
        let g = EvaluationGrid::uniform(4).unwrap();
        assert_eq!(
            ecdf_eval(&[0.25, 0.5, 0.5, 1.0], &g).counts(),
            &[1, 3, 3, 4]
        );
    }

    #[test]
    fn discrete_ecdf_uses_levels() {
        let u = PitValues::discrete(vec![0.1 + 0.2, 0.7], 10).unwrap();
        let g = EvaluationGrid::new(vec![0.3, 0.7, 1.0]).unwrap();
        assert_eq!(ecdf_eval_pit(&u, &g).counts(), &[1, 2, 2]);
    }

    #[test]
    fn default_grid_examples() {
        let g = default_grid(250, Resolution::Continuous, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_abs_diff_eq!(g.points()[0], 0.01);
        let g = default_grid(250, Resolution::Discrete(50), 100).unwrap();
        assert_eq!(g.len(), 50);
        let g = default_grid(3, Resolution::Continuous, 100).unwrap();
        assert_eq!(g.points(), &[1.0 / 3.0, 2.0 / 3.0, 1.0]);
        // 60 is capped at 42, largest divisor of 60 not above 42 is 30
        let g = default_grid(42, Resolution::Discrete(60), 100).unwrap();
        assert_eq!(g.len(), 30);
    }

    #[test]
    fn rank_scale_shift() {
        let u = PitValues::discrete(vec![0.0, 0.5, 1.0], 2).unwrap();
        let r = u.to_rank_scale();
        assert_eq!(r.values(), &[1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(r.resolution(), Resolution::Discrete(3));
    }

    #[test]
    fn grid_validation() {
        assert!(EvaluationGrid::new(vec![]).is_err());
        assert!(EvaluationGrid::new(vec![0.0, 0.5]).is_err());
        assert!(EvaluationGrid::new(vec![0.5, 0.5]).is_err());
        assert!(EvaluationGrid::new(vec![0.5, 1.1]).is_err());
        let g = fractional_rank_grid(&[3.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.points(), &[2.0 / 3.0, 1.0]);
    }
}
