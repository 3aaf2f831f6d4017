//! Precomputed `gamma` values over `(N, L, alpha)` with log-log interpolation
//! in `N`.

use serde::{Deserialize, Serialize};

use crate::adjust::{GammaMethod, GammaResult, DEFAULT_REPLICATES, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::multi::{default_multi_grid, MultiSample};
use crate::sampling::map_replicates;
use crate::single::{SingleSample, DEFAULT_K_MAX};
use crate::transform::{default_grid, EvaluationGrid, Resolution};

pub const SCHEMA: &str = "gamma-grid/1";

/// Alphas closer than this are treated as the same slice.
const ALPHA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub coverage: f64,
    pub method: GammaMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub schema: String,
    pub entries: Vec<GammaEntry>,
}

/// How many evaluation points each cached entry uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KPolicy {
    /// The default equally spaced grid with at most `k_max` points.
    Default { k_max: usize },
    /// Exactly `K` equally spaced points.
    Fixed(usize),
}

impl Default for KPolicy {
    fn default() -> Self {
        KPolicy::Default {
            k_max: DEFAULT_K_MAX,
        }
    }
}

impl KPolicy {
    pub fn grid(self, n: usize, l: usize) -> Result<EvaluationGrid> {
        match self {
            KPolicy::Fixed(k) => EvaluationGrid::uniform(k),
            KPolicy::Default { k_max } if l == 1 => default_grid(n, Resolution::Continuous, k_max),
            KPolicy::Default { k_max } if k_max == DEFAULT_K_MAX => default_multi_grid(n, l),
            KPolicy::Default { k_max } => {
                default_grid(n, Resolution::Discrete((n * l) as u64), k_max)
            }
        }
    }
}

/// Options for [`build_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub k_policy: KPolicy,
    pub tol: f64,
    /// Replicates for chain counts without an exact recursion.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            k_policy: KPolicy::default(),
            tol: DEFAULT_TOL,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
        }
    }
}

fn compute_entry(n: usize, l: usize, alpha: f64, opts: &BuildOptions) -> Result<GammaEntry> {
    let grid = opts.k_policy.grid(n, l)?;
    let k = grid.len();
    let r = if l == 1 {
        SingleSample::new(n, grid)?.optimize_gamma(alpha, opts.tol)?
    } else {
        let model = MultiSample::new(n, l, grid)?;
        if l <= 3 {
            model.optimize_gamma(alpha, opts.tol)?
        } else {
            model.simulate_gamma(alpha, opts.replicates, opts.seed)?
        }
    };
    Ok(GammaEntry {
        n,
        l,
        k,
        alpha,
        gamma: r.gamma,
        coverage: r.attained_coverage,
        method: r.method,
    })
}

/// `gamma` for every `(N, L, alpha)` combination: optimization where an
/// exact recursion exists (`L <= 3`), simulation otherwise.
pub fn build_grid(
    ns: &[usize],
    ls: &[usize],
    alphas: &[f64],
    opts: &BuildOptions,
) -> Result<GammaGrid> {
    if ns.is_empty() || ls.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidInput(
            "N, L and alpha lists must be nonempty".into(),
        ));
    }
    let mut keys = Vec::new();
    for &l in ls {
        for &alpha in alphas {
            for &n in ns {
                keys.push((l, alpha, n));
            }
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.dedup_by(|a, b| a.0 == b.0 && (a.1 - b.1).abs() < ALPHA_EPS && a.2 == b.2);
    let entries = map_replicates(keys.len(), |i| {
        let (l, alpha, n) = keys[i];
        compute_entry(n, l, alpha, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(GammaGrid {
        schema: SCHEMA.to_string(),
        entries,
    })
}

impl GammaGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: GammaGrid = serde_json::from_str(text)?;
        if grid.schema != SCHEMA {
            return Err(Error::Serde(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                grid.schema
            )));
        }
        Ok(grid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn slice(&self, l: usize, alpha: f64) -> Vec<&GammaEntry> {
        let mut s: Vec<&GammaEntry> = self
            .entries
            .iter()
            .filter(|e| e.l == l && (e.alpha - alpha).abs() < ALPHA_EPS)
            .collect();
        s.sort_by_key(|e| e.n);
        s
    }

    /// `gamma` for `N` by linear interpolation of `log gamma` against
    /// `log N` between the bracketing entries of the `(L, alpha)` slice.
    /// Stored keys are returned unchanged. The reported coverage of an
    /// interpolated value is the same blend of the bracketing coverages, an
    /// estimate only; recompute it with the matching model when it matters.
    pub fn interpolate(&self, n: usize, l: usize, alpha: f64) -> Result<GammaResult> {
        let slice = self.slice(l, alpha);
        let (first, last) = match (slice.first(), slice.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::MissingSlice { l, alpha }),
        };
        if n < first.n || n > last.n {
            return Err(Error::OutOfRange {
                n,
                min: first.n,
                max: last.n,
            });
        }
        if let Some(e) = slice.iter().find(|e| e.n == n) {
            return Ok(GammaResult {
                gamma: e.gamma,
                attained_coverage: e.coverage,
                method: e.method,
                iterations: 0,
            });
        }
        let hi = slice.partition_point(|e| e.n < n);
        let (a, b) = (slice[hi - 1], slice[hi]);
        let w = ((n as f64).ln() - (a.n as f64).ln()) / ((b.n as f64).ln() - (a.n as f64).ln());
        let gamma = (a.gamma.ln() + w * (b.gamma.ln() - a.gamma.ln())).exp();
        Ok(GammaResult {
            gamma,
            attained_coverage: a.coverage + w * (b.coverage - a.coverage),
            method: GammaMethod::Interpolated,
            iterations: 0,
        })
    }
}

pub fn interpolate(grid: &GammaGrid, n: usize, l: usize, alpha: f64) -> Result<GammaResult> {
    grid.interpolate(n, l, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single::gamma_optimize;

    fn entry(n: usize, gamma: f64) -> GammaEntry {
        GammaEntry {
            n,
            l: 1,
            k: 100,
            alpha: 0.05,
            gamma,
            coverage: 0.95,
            method: GammaMethod::Optimization,
        }
    }

    fn toy() -> GammaGrid {
        GammaGrid {
            schema: SCHEMA.into(),
            entries: vec![entry(100, 0.004), entry(200, 0.003)],
        }
    }

    #[test]
    fn stored_key_is_exact() {
        let r = toy().interpolate(200, 1, 0.05).unwrap();
        assert_eq!(r.gamma, 0.003);
        assert_eq!(r.method, GammaMethod::Optimization);
    }

    #[test]
    fn log_log_blend() {
        let r = toy().interpolate(141, 1, 0.05).unwrap();
        let w = (141f64.ln() - 100f64.ln()) / (200f64.ln() - 100f64.ln());
        let expected = (0.004f64.ln() * (1.0 - w) + 0.003f64.ln() * w).exp();
        assert!((r.gamma - expected).abs() < 1e-15);
        assert!(r.gamma < 0.004 && r.gamma > 0.003);
        assert_eq!(r.method, GammaMethod::Interpolated);
    }

    #[test]
    fn range_and_slice_errors() {
        assert!(matches!(
            toy().interpolate(50, 1, 0.05),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            toy().interpolate(400, 1, 0.05),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            toy().interpolate(150, 2, 0.05),
            Err(Error::MissingSlice { .. })
        ));
        assert!(matches!(
            toy().interpolate(150, 1, 0.1),
            Err(Error::MissingSlice { .. })
        ));
    }

    #[test]
    fn singleton_build_matches_direct() {
        let g = build_grid(&[60], &[1], &[0.05], &BuildOptions::default()).unwrap();
        assert_eq!(g.entries.len(), 1);
        let direct =
            gamma_optimize(60, &EvaluationGrid::uniform(60).unwrap(), 0.05, DEFAULT_TOL).unwrap();
        assert_eq!(g.entries[0].gamma, direct.gamma);
        assert_eq!(g.entries[0].k, 60);
    }

    #[test]
    fn json_round_trip_and_schema() {
        let g = toy();
        let text = g.to_json().unwrap();
        assert_eq!(GammaGrid::from_json(&text).unwrap(), g);
        let bad = text.replace(SCHEMA, "gamma-grid/0");
        assert!(GammaGrid::from_json(&bad).is_err());
    }
}
