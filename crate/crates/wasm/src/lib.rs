//! Browser bindings: each export returns a finished SVG string.

use ecdf_bands::multi::test_multi;
use ecdf_bands::report::{render_svg, PlotSpec};
use ecdf_bands::single::{bands_from_gamma, gamma_optimize, test_single};
use ecdf_bands::thinning::ar1_simulate;
use ecdf_bands::transform::{default_grid, Resolution};
use ecdf_bands::{Method, PitValues, TiePolicy};
use statrs::distribution::{ContinuousCDF, Normal};
use wasm_bindgen::prelude::*;

/// Replicates behind `gamma` for more than three chains; kept small so the
/// page stays responsive without threads.
const DEMO_REPLICATES: usize = 2_000;

fn js(e: ecdf_bands::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn verdict(inside: bool) -> &'static str {
    if inside {
        "inside the band"
    } else {
        "outside the band"
    }
}

/// Empty bands for `n` uniform draws: how `gamma` and the band width react to
/// `n`, `alpha` and the number of evaluation points.
#[wasm_bindgen]
pub fn bands_svg(n: usize, alpha: f64, grid_k: usize, difference: bool) -> Result<String, JsError> {
    let grid = default_grid(n, Resolution::Continuous, grid_k).map_err(js)?;
    let g = gamma_optimize(n, &grid, alpha, 1e-6).map_err(js)?;
    let bands = bands_from_gamma(n, &grid, g.gamma).map_err(js)?;
    let spec = PlotSpec::ecdf(bands, Vec::new(), difference)
        .map_err(js)?
        .with_title(format!(
            "N = {n}, K = {}, gamma = {:.5}, coverage = {:.4}",
            grid.len(),
            g.gamma,
            g.attained_coverage
        ));
    render_svg(&spec).map_err(js)
}

/// Draws from `N(shift, scale^2)` tested for being standard normal through
/// their PIT values.
#[wasm_bindgen]
pub fn single_svg(
    n: usize,
    shift: f64,
    scale: f64,
    seed: u64,
    difference: bool,
) -> Result<String, JsError> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(JsError::new("scale must be positive"));
    }
    let normal = Normal::standard();
    let z = ar1_simulate(0.0, n, 1, seed).map_err(js)?;
    let u = z
        .chain(0)
        .iter()
        .map(|x| normal.cdf(shift + scale * x))
        .collect();
    let u = PitValues::continuous(u).map_err(js)?;
    let r = test_single(&u, 0.05, &Method::default(), None).map_err(js)?;
    let spec = PlotSpec::ecdf(r.bands, vec![r.trajectory], difference)
        .map_err(js)?
        .with_labels(vec!["PIT".into()])
        .with_title(format!(
            "N(shift {shift}, sd {scale}) vs N(0, 1): {}",
            verdict(r.inside)
        ));
    render_svg(&spec).map_err(js)
}

/// `chains` standard normal chains with the first one shifted by `shift`.
#[wasm_bindgen]
pub fn multi_svg(
    n: usize,
    chains: usize,
    shift: f64,
    seed: u64,
    difference: bool,
) -> Result<String, JsError> {
    let mut set = ar1_simulate(0.0, n, chains, seed).map_err(js)?;
    set.map_chain(0, |x| x + shift);
    let method = if chains <= 3 {
        Method::default()
    } else {
        Method::Simulate {
            replicates: DEMO_REPLICATES,
            seed,
        }
    };
    let r = test_multi(&set, 0.05, &method, None, TiePolicy::Deterministic).map_err(js)?;
    let rejected: Vec<String> = r
        .rejected_chains()
        .iter()
        .map(|c| (c + 1).to_string())
        .collect();
    let title = if rejected.is_empty() {
        format!("{chains} chains, chain 1 shifted by {shift}: all inside")
    } else {
        format!(
            "{chains} chains, chain 1 shifted by {shift}: chains {} outside",
            rejected.join(", ")
        )
    };
    let trajectories = r.chains.into_iter().map(|c| c.trajectory).collect();
    let spec = PlotSpec::ecdf(r.bands, trajectories, difference)
        .map_err(js)?
        .with_title(title);
    render_svg(&spec).map_err(js)
}
