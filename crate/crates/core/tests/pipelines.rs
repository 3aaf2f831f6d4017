//! End-to-end behaviour of thinning, the gamma cache and power sweeps.

use ecdf_bands::cache::{build_grid, BuildOptions, GammaGrid};
use ecdf_bands::power::{power_sweep, Family, PowerConfig, Statistic, TestKind};
use ecdf_bands::single::SingleSample;
use ecdf_bands::thinning::{ar1_simulate, ess_mean, ess_report, thin, thinning_factor, Strategy};
use ecdf_bands::transform::{default_grid, Resolution};
use ecdf_bands::{ChainSet, GammaMethod};

#[test]
fn thinning_keeps_every_t_th_draw() {
    let c = ChainSet::new(vec![(0..10).map(f64::from).collect()]).unwrap();
    let t = thin(&c, 3).unwrap();
    assert_eq!(t.chain(0), &[0.0, 3.0, 6.0, 9.0]);
}

#[test]
fn ar1_mean_ess_tracks_theory() {
    // ESS / N -> (1 - phi) / (1 + phi) for the mean of an AR(1) chain
    for phi in [0.0, 0.5, 0.8] {
        let c = ar1_simulate(phi, 20_000, 4, 17).unwrap();
        let rel = ess_mean(&c).unwrap() / 80_000.0;
        let want = (1.0 - phi) / (1.0 + phi);
        assert!(
            (rel / want - 1.0).abs() < 0.15,
            "phi={phi}: {rel} vs {want}"
        );
    }
}

#[test]
fn strategies_agree_on_ar1() {
    let c = ar1_simulate(0.7, 4000, 2, 5).unwrap();
    let report = ess_report(&c).unwrap();
    let factors: Vec<usize> = [
        Strategy::MeanEss,
        Strategy::Quantile19,
        Strategy::BulkTailMin,
    ]
    .iter()
    .map(|&s| thinning_factor(&report, 8000, s).factor)
    .collect();
    assert!(
        factors.iter().all(|&f| (3..=12).contains(&f)),
        "{factors:?}"
    );
    let plan = thinning_factor(&report, 8000, Strategy::BulkTailMin);
    assert_eq!(thin(&c, plan.factor).unwrap().len(), plan.length);
}

#[test]
fn cached_gamma_interpolates_to_nominal_coverage() {
    let grid = build_grid(
        &[50, 100, 200, 400],
        &[1],
        &[0.05],
        &BuildOptions::default(),
    )
    .unwrap();
    let grid = GammaGrid::from_json(&grid.to_json().unwrap()).unwrap();
    for n in [70, 141, 300] {
        let r = grid.interpolate(n, 1, 0.05).unwrap();
        assert_eq!(r.method, GammaMethod::Interpolated);
        let model =
            SingleSample::new(n, default_grid(n, Resolution::Continuous, 100).unwrap()).unwrap();
        let cov = model.coverage(r.gamma);
        assert!((cov - 0.95).abs() < 0.015, "N={n}: {cov}");
    }
}

#[test]
fn power_sweeps_are_reproducible() {
    let mut cfg = PowerConfig::new(50, 1);
    cfg.replicates = 1000;
    cfg.critical_replicates = 2000;
    cfg.seed = 3;
    let tests = [TestKind::Bands, TestKind::Stat(Statistic::Ks)];
    let a = power_sweep(&tests, Family::C, &[0.5, 1.0, 2.0], &cfg).unwrap();
    let b = power_sweep(&tests, Family::C, &[0.5, 1.0, 2.0], &cfg).unwrap();
    assert_eq!(a, b);
    for t in tests {
        let r = a.rates(t).unwrap();
        assert!(r[0] > r[1] && r[2] > r[1], "{t}: {r:?}");
    }
}

#[test]
fn multi_chain_sweep_rejects_only_bands_and_detects_shift() {
    let mut cfg = PowerConfig::new(60, 3);
    cfg.replicates = 1000;
    assert!(power_sweep(&[TestKind::Stat(Statistic::W2)], Family::A, &[2.0], &cfg).is_err());
    let r = power_sweep(&[TestKind::Bands], Family::A, &[1.0, 3.0], &cfg).unwrap();
    let rates = r.rates(TestKind::Bands).unwrap();
    assert!(rates[0] < 0.1 && rates[1] > 0.5, "{rates:?}");
}
