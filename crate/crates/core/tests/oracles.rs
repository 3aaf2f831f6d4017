//! Brute-force enumeration checks of the exact coverage recursions.

use ecdf_bands::multi::{bands_from_gamma_multi, coverage_probability_multi, pooled_draws};
use ecdf_bands::single::{bands_from_gamma, coverage_probability};
use ecdf_bands::transform::{ecdf_eval, ecdf_eval_pit};
use ecdf_bands::{EvaluationGrid, PitValues};

/// All sequences of length `len` over `0..base`.
fn sequences(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..base).map(move |d| {
                    let mut t = s.clone();
                    t.push(d);
                    t
                })
            })
            .collect();
    }
    out
}

/// All distinct arrangements of `l` labels, each used `n` times.
fn interleavings(n: usize, l: usize) -> Vec<Vec<usize>> {
    fn go(left: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.iter().all(|&c| c == 0) {
            out.push(cur.clone());
            return;
        }
        for label in 0..left.len() {
            if left[label] > 0 {
                left[label] -= 1;
                cur.push(label);
                go(left, cur, out);
                cur.pop();
                left[label] += 1;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut vec![n; l], &mut Vec::new(), &mut out);
    out
}

fn grid(points: &[f64]) -> EvaluationGrid {
    EvaluationGrid::new(points.to_vec()).unwrap()
}

#[test]
fn single_matches_enumeration_on_level_grid() {
    // values uniform on {1, ..., S}/S satisfy Pr(u <= j/S) = j/S exactly
    for (n, s) in [(1, 3), (2, 4), (3, 2), (4, 4), (5, 3)] {
        let g = EvaluationGrid::uniform(s).unwrap();
        let samples = sequences(s, n);
        for gamma in [0.01, 0.05, 0.1, 0.3, 0.7] {
            let bands = bands_from_gamma(n, &g, gamma).unwrap();
            let inside = samples
                .iter()
                .filter(|smp| {
                    let u: Vec<f64> = smp.iter().map(|&d| (d + 1) as f64 / s as f64).collect();
                    bands.contains(ecdf_eval(&u, &g).counts())
                })
                .count();
            let expected = inside as f64 / samples.len() as f64;
            let got = coverage_probability(n, &g, gamma).unwrap();
            assert!(
                (got - expected).abs() <= 1e-12,
                "n={n} s={s} gamma={gamma}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn single_matches_enumeration_of_empirical_pit() {
    // empirical PIT values {0, ..., S}/S, moved to the rank scale
    for (n, s) in [(2, 2), (3, 4), (4, 4), (5, 2)] {
        let g = EvaluationGrid::uniform(s as usize + 1).unwrap();
        let samples = sequences(s as usize + 1, n);
        for gamma in [0.01, 0.05, 0.1, 0.4] {
            let bands = bands_from_gamma(n, &g, gamma).unwrap();
            let inside = samples
                .iter()
                .filter(|smp| {
                    let u: Vec<f64> = smp.iter().map(|&j| j as f64 / s as f64).collect();
                    let pit = PitValues::discrete(u, s).unwrap().to_rank_scale();
                    bands.contains(ecdf_eval_pit(&pit, &g).counts())
                })
                .count();
            let expected = inside as f64 / samples.len() as f64;
            let got = coverage_probability(n, &g, gamma).unwrap();
            assert!((got - expected).abs() <= 1e-12, "n={n} s={s} gamma={gamma}");
        }
    }
}

fn multi_enumeration(n: usize, l: usize, g: &EvaluationGrid, gamma: f64) -> f64 {
    let bands = bands_from_gamma_multi(n, l, g, gamma).unwrap();
    let draws = pooled_draws(n, l, g);
    let all = interleavings(n, l);
    let inside = all
        .iter()
        .filter(|labels| {
            (0..l).all(|chain| {
                let counts: Vec<u64> = draws
                    .iter()
                    .map(|&s| labels[..s as usize].iter().filter(|&&c| c == chain).count() as u64)
                    .collect();
                bands.contains(&counts)
            })
        })
        .count();
    inside as f64 / all.len() as f64
}

#[test]
fn two_chains_match_enumeration() {
    assert_eq!(interleavings(4, 2).len(), 70);
    let grids = [
        grid(&[0.25, 0.5, 0.75]),
        EvaluationGrid::uniform(3).unwrap(),
        grid(&[0.125, 0.625, 1.0]),
        EvaluationGrid::uniform(8).unwrap(),
    ];
    for n in 1..=4 {
        for g in &grids {
            for gamma in [0.0, 0.01, 0.05, 0.1, 0.3, 0.6, 1.0] {
                let expected = multi_enumeration(n, 2, g, gamma);
                let got = coverage_probability_multi(n, 2, g, gamma).unwrap();
                assert!(
                    (got - expected).abs() <= 1e-12,
                    "n={n} grid={:?} gamma={gamma}: {got} vs {expected}",
                    g.points()
                );
            }
        }
    }
}

#[test]
fn three_chains_match_enumeration() {
    let grids = [
        EvaluationGrid::uniform(3).unwrap(),
        EvaluationGrid::uniform(6).unwrap(),
        grid(&[0.2, 0.45, 0.8]),
    ];
    for n in 1..=3 {
        for g in &grids {
            for gamma in [0.0, 0.05, 0.2, 0.5, 0.9] {
                let expected = multi_enumeration(n, 3, g, gamma);
                let got = coverage_probability_multi(n, 3, g, gamma).unwrap();
                assert!(
                    (got - expected).abs() <= 1e-12,
                    "n={n} grid={:?} gamma={gamma}: {got} vs {expected}",
                    g.points()
                );
            }
        }
    }
}
