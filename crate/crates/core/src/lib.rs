//! Simultaneous confidence bands for empirical CDFs of PIT values, and a
//! rank-based extension that tests whether several MCMC chains share one
//! distribution.
//!
//! The single-sample test ([`single::test_single`]) checks that values are
//! uniform on `[0, 1]`; the multi-chain test ([`multi::test_multi`]) jointly
//! ranks all draws and checks each chain's fractional ranks against shared
//! hypergeometric bands. The adjusted pointwise level `gamma` that makes the
//! bands simultaneous is found either by simulation or by optimizing the
//! exact coverage computed with a Markov recursion over ECDF trajectories.

pub mod adjust;
pub mod cache;
pub mod dist;
pub mod error;
pub mod multi;
pub mod optim;
pub mod power;
pub mod report;
pub mod sampling;
pub mod single;
pub mod thinning;
pub mod transform;

pub use adjust::{GammaMethod, GammaResult, Method};
pub use error::{Error, Result};
pub use single::{ConfidenceBands, Exceedance, Side, TestReport};
pub use transform::{ChainSet, EcdfTrajectory, EvaluationGrid, PitValues, Resolution, TiePolicy};
