//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use ecdf_bands::multi::test_multi;
use ecdf_bands::report::{render_svg, PlotSpec};
use ecdf_bands::sampling::replicate_rng;
use ecdf_bands::{ChainSet, Method, TiePolicy};
use rand::Rng;
use rand_distr::StandardNormal;

pub const GOLDEN_SEED: u64 = 20_220_118;
pub const GOLDEN_N: usize = 250;
pub const GOLDEN_SHIFT: f64 = 0.5;

/// Four chains of standard normal draws; chain 1 is shifted up by
/// `GOLDEN_SHIFT`.
pub fn four_chain_fixture() -> ChainSet {
    let chains = (0..4)
        .map(|c| {
            let mut rng = replicate_rng(GOLDEN_SEED, c as u64);
            let shift = if c == 1 { GOLDEN_SHIFT } else { 0.0 };
            (0..GOLDEN_N)
                .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
                .collect()
        })
        .collect();
    ChainSet::new(chains).unwrap()
}

/// ECDF difference plot of the fixture against its simultaneous bands.
pub fn golden_svg() -> String {
    let chains = four_chain_fixture();
    let method = Method::Simulate {
        replicates: 10_000,
        seed: GOLDEN_SEED,
    };
    let report = test_multi(&chains, 0.05, &method, None, TiePolicy::Deterministic).unwrap();
    let trajectories = report.chains.iter().map(|c| c.trajectory.clone()).collect();
    let spec = PlotSpec::ecdf(report.bands, trajectories, true)
        .unwrap()
        .with_title("Four chains, chain 2 shifted");
    render_svg(&spec).unwrap()
}

pub const GOLDEN_PATH: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/golden/four_chains_diff.svg"
);
