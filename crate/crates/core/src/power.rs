//! Departures from uniformity and classical uniformity statistics, used to
//! measure how often each test rejects transformed uniform samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::{check_alpha, GammaResult, Method, DEFAULT_REPLICATES};
use crate::error::{Error, Result};
use crate::multi::{default_multi_grid, MultiSample};
use crate::sampling::{map_replicates, proportion_se, quantile_type7, replicate_rng};
use crate::single::{ConfidenceBands, SingleSample, DEFAULT_K_MAX};
use crate::transform::{default_grid, Resolution};

pub const MIN_POWER_REPLICATES: usize = 1000;

/// Keeps critical-value samples independent of the sweep's samples.
const CRITICAL_SEED_OFFSET: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Family::A),
            "B" => Ok(Family::B),
            "C" => Ok(Family::C),
            _ => Err(Error::InvalidInput(format!("unknown family {s:?}"))),
        }
    }
}

/// `f_{A,k}(x) = 1 - (1 - x)^k` skews mass toward 1; `f_B` pushes it to
/// both ends for `k > 1`; `f_C` pulls it to the center for `k > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    pub family: Family,
    pub k: f64,
}

impl Transformation {
    pub fn new(family: Family, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "power k must be positive, got {k}"
            )));
        }
        Ok(Transformation { family, k })
    }

    /// Unchecked evaluation for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        // 2^(k-1) y^k written as (2y)^k / 2, exact at the endpoints
        let k = self.k;
        match self.family {
            Family::A => 1.0 - (1.0 - x).powf(k),
            Family::B if x <= 0.5 => 0.5 * (2.0 * x).powf(k),
            Family::B => 1.0 - 0.5 * (2.0 - 2.0 * x).powf(k),
            Family::C if x <= 0.5 => 0.5 - 0.5 * (1.0 - 2.0 * x).powf(k),
            Family::C => 0.5 + 0.5 * (2.0 * x - 1.0).powf(k),
        }
    }
}

pub fn apply_transform(x: f64, t: &Transformation) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("{x} outside [0, 1]")));
    }
    Ok(t.eval(x))
}

fn sorted(u: &[f64]) -> Vec<f64> {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean absolute distance of the order statistics from `i / (N + 1)`.
pub fn stat_t1(u: &[f64]) -> f64 {
    let v = sorted(u);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| (x - (i + 1) as f64 / (n + 1.0)).abs())
        .sum::<f64>()
        / n
}

/// Cramér–von Mises statistic.
pub fn stat_w2(u: &[f64]) -> f64 {
    let v = sorted(u);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| (x - (2 * i + 1) as f64 / (2.0 * n)).powi(2))
        .sum::<f64>()
        + 1.0 / (12.0 * n)
}

/// Watson's statistic `U² = W² - N (mean - 1/2)²`.
pub fn stat_u2(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    stat_w2(u) - n * (mean - 0.5).powi(2)
}

/// Kolmogorov–Smirnov distance to the uniform CDF.
pub fn stat_ks(u: &[f64]) -> f64 {
    let v = sorted(u);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    T1,
    W2,
    U2,
    Ks,
}

impl Statistic {
    pub fn eval(self, u: &[f64]) -> f64 {
        match self {
            Statistic::T1 => stat_t1(u),
            Statistic::W2 => stat_w2(u),
            Statistic::U2 => stat_u2(u),
            Statistic::Ks => stat_ks(u),
        }
    }
}

/// Upper `1 - alpha` quantile of the statistic over `replicates` uniform
/// samples of size `n`.
pub fn critical_value(
    stat: Statistic,
    n: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if replicates < MIN_POWER_REPLICATES {
        return Err(Error::TooFewReplicates {
            required: MIN_POWER_REPLICATES,
            got: replicates,
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let mut values = map_replicates(replicates, |m| {
        let mut rng = replicate_rng(seed, m as u64);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        stat.eval(&u)
    });
    Ok(quantile_type7(&mut values, 1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Bands,
    Stat(Statistic),
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bands" => Ok(TestKind::Bands),
            "t1" => Ok(TestKind::Stat(Statistic::T1)),
            "w2" => Ok(TestKind::Stat(Statistic::W2)),
            "u2" => Ok(TestKind::Stat(Statistic::U2)),
            "ks" => Ok(TestKind::Stat(Statistic::Ks)),
            _ => Err(Error::InvalidInput(format!("unknown test {s:?}"))),
        }
    }
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TestKind::Bands => "bands",
            TestKind::Stat(Statistic::T1) => "t1",
            TestKind::Stat(Statistic::W2) => "w2",
            TestKind::Stat(Statistic::U2) => "u2",
            TestKind::Stat(Statistic::Ks) => "ks",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub n: usize,
    /// `1` for the single-sample experiment; otherwise one of `chains`
    /// chains is transformed before joint ranking.
    pub chains: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    /// `gamma` for the bands test; chosen automatically when `None`.
    pub gamma: Option<GammaResult>,
    /// Uniform samples behind the statistics' critical values.
    pub critical_replicates: usize,
}

impl PowerConfig {
    pub fn new(n: usize, chains: usize) -> Self {
        PowerConfig {
            n,
            chains,
            alpha: 0.05,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            gamma: None,
            critical_replicates: DEFAULT_REPLICATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRates {
    pub test: TestKind,
    pub rates: Vec<f64>,
    pub std_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub family: Family,
    pub n: usize,
    pub chains: usize,
    pub alpha: f64,
    pub ks: Vec<f64>,
    pub tests: Vec<TestRates>,
    pub replicates: usize,
    pub seed: u64,
    pub gamma: Option<GammaResult>,
}

impl PowerCurve {
    pub fn rates(&self, test: TestKind) -> Option<&[f64]> {
        self.tests
            .iter()
            .find(|t| t.test == test)
            .map(|t| t.rates.as_slice())
    }
}

enum BandsModel {
    Single(SingleSample),
    Multi(MultiSample),
}

/// Rejection rates of each test on uniform samples transformed by
/// `f_{family,k}` for every `k`. All `k` share the same underlying uniform
/// draws, so differences between `k` values are not blurred by sampling
/// noise.
pub fn power_sweep(
    tests: &[TestKind],
    family: Family,
    ks: &[f64],
    cfg: &PowerConfig,
) -> Result<PowerCurve> {
    check_alpha(cfg.alpha)?;
    if cfg.replicates < MIN_POWER_REPLICATES {
        return Err(Error::TooFewReplicates {
            required: MIN_POWER_REPLICATES,
            got: cfg.replicates,
        });
    }
    if cfg.n == 0 || cfg.chains == 0 {
        return Err(Error::InvalidInput(
            "N and the chain count must be positive".into(),
        ));
    }
    if cfg.chains > 1 && tests.iter().any(|t| *t != TestKind::Bands) {
        return Err(Error::InvalidParams(
            "only the bands test compares several chains".into(),
        ));
    }
    let transforms = ks
        .iter()
        .map(|&k| Transformation::new(family, k))
        .collect::<Result<Vec<_>>>()?;

    let mut gamma = cfg.gamma.clone();
    let bands: Option<(BandsModel, ConfidenceBands)> = if tests.contains(&TestKind::Bands) {
        let (model, g) = if cfg.chains == 1 {
            let grid = default_grid(cfg.n, Resolution::Continuous, DEFAULT_K_MAX)?;
            let m = SingleSample::new(cfg.n, grid)?;
            let g = match &gamma {
                Some(g) => g.clone(),
                None => m.resolve(cfg.alpha, &Method::default())?,
            };
            (BandsModel::Single(m), g)
        } else {
            let grid = default_multi_grid(cfg.n, cfg.chains)?;
            let m = MultiSample::new(cfg.n, cfg.chains, grid)?;
            let g = match &gamma {
                Some(g) => g.clone(),
                None if cfg.chains <= 3 => m.resolve(cfg.alpha, &Method::default())?,
                None => m.simulate_gamma(cfg.alpha, DEFAULT_REPLICATES, cfg.seed)?,
            };
            (BandsModel::Multi(m), g)
        };
        let b = match &model {
            BandsModel::Single(m) => m.bands(g.gamma),
            BandsModel::Multi(m) => m.bands(g.gamma),
        };
        gamma = Some(g);
        Some((model, b))
    } else {
        None
    };

    let critical: Vec<Option<f64>> = tests
        .iter()
        .map(|t| match t {
            TestKind::Bands => Ok(None),
            TestKind::Stat(s) => critical_value(
                *s,
                cfg.n,
                cfg.alpha,
                cfg.critical_replicates,
                cfg.seed.wrapping_add(CRITICAL_SEED_OFFSET),
            )
            .map(Some),
        })
        .collect::<Result<_>>()?;

    let (n, chains) = (cfg.n, cfg.chains);
    let per_replicate = map_replicates(cfg.replicates, |m| {
        let mut rng = replicate_rng(cfg.seed, m as u64);
        let base: Vec<f64> = (0..n * chains).map(|_| rng.random::<f64>()).collect();
        let mut out = Vec::with_capacity(transforms.len() * tests.len());
        for tr in &transforms {
            let mut values = base.clone();
            for v in &mut values[..n] {
                *v = tr.eval(*v);
            }
            for (test, cv) in tests.iter().zip(&critical) {
                let reject = match (test, &bands) {
                    (TestKind::Stat(s), _) => s.eval(&values[..n]) > cv.expect("critical value"),
                    (TestKind::Bands, Some((BandsModel::Single(model), b))) => {
                        let mut v = values.clone();
                        v.sort_unstable_by(f64::total_cmp);
                        let counts: Vec<u64> = model
                            .grid()
                            .points()
                            .iter()
                            .map(|&z| v.partition_point(|&x| x <= z) as u64)
                            .collect();
                        !b.contains(&counts)
                    }
                    (TestKind::Bands, Some((BandsModel::Multi(model), b))) => {
                        let mut pooled: Vec<(f64, usize)> = values
                            .iter()
                            .enumerate()
                            .map(|(j, &x)| (x, j / n))
                            .collect();
                        pooled.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                        let labels: Vec<usize> = pooled.into_iter().map(|(_, c)| c).collect();
                        !model
                            .counts_from_labels(&labels)
                            .iter()
                            .all(|c| b.contains(c))
                    }
                    (TestKind::Bands, None) => unreachable!(),
                };
                out.push(reject);
            }
        }
        out
    });

    let reps = cfg.replicates as f64;
    let tests_out = tests
        .iter()
        .enumerate()
        .map(|(ti, &test)| {
            let rates: Vec<f64> = (0..transforms.len())
                .map(|ki| {
                    let idx = ki * tests.len() + ti;
                    per_replicate.iter().filter(|r| r[idx]).count() as f64 / reps
                })
                .collect();
            let std_errors = rates
                .iter()
                .map(|&r| proportion_se(r, cfg.replicates))
                .collect();
            TestRates {
                test,
                rates,
                std_errors,
            }
        })
        .collect();

    Ok(PowerCurve {
        family,
        n: cfg.n,
        chains: cfg.chains,
        alpha: cfg.alpha,
        ks: ks.to_vec(),
        tests: tests_out,
        replicates: cfg.replicates,
        seed: cfg.seed,
        gamma,
    })
}
