use std::fmt::Write as _;

use mtrbo::objectives::{
    abs, load_returns, make_benchmark, moments_from_prices, portfolio_objective, rastrigin, schwefel_max, stairs,
    PortfolioProblem, BENCHMARK_NAMES, DAILY_PERIODS,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn benchmarks_are_finite_on_their_domains() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in BENCHMARK_NAMES {
        for d in [2, 20] {
            let Ok(f) = make_benchmark(name, d) else { continue };
            let dom = f.domain();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|i| rng.random_range(dom.lower()[i]..=dom.upper()[i])).collect();
                let v = f.evaluate(&x);
                assert!(v.is_finite(), "{name} in {d}D gave {v} at {x:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn separable_functions_ignore_coordinate_order(
        x in prop::collection::vec(-100.0f64..100.0, 2..12),
        seed in any::<u64>(),
    ) {
        let mut perm = x.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for f in [abs, rastrigin, stairs, schwefel_max] {
            let (a, b) = (f(&x), f(&perm));
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn portfolio_weights_normalize_and_objective_is_concave(
        seed in any::<u64>(),
        n in 2usize..=6,
        lambda in 0.0f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.4)).collect();
        // Σ = AᵀA is positive semi-definite
        let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-0.3..0.3)).collect()).collect();
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum()).collect())
            .collect();
        let prob = PortfolioProblem::new(mu, cov, lambda).unwrap();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let w = prob.normalize_weights(&raw).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let other = prob.normalize_weights(&(0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>()).unwrap();
        let mid: Vec<f64> = w.iter().zip(&other).map(|(p, q)| 0.5 * (p + q)).collect();
        let f = |v: &[f64]| portfolio_objective(&prob, v).unwrap();
        prop_assert!(f(&mid) >= 0.5 * (f(&w) + f(&other)) - 1e-12);
    }
}

#[test]
fn price_file_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let tickers = ["AAA", "BBB", "CCC"];
    let mut prices = vec![vec![100.0, 50.0, 20.0]];
    for _ in 0..250 {
        let last = prices.last().unwrap();
        let next = last.iter().map(|p| p * (1.0 + rng.random_range(-0.03..0.035))).collect();
        prices.push(next);
    }
    let mut text = format!("date,{}\n", tickers.join(","));
    for (t, row) in prices.iter().enumerate() {
        write!(text, "2024-{:02}-{:02}", 1 + t / 28, 1 + t % 28).unwrap();
        for p in row {
            // `{}` prints the shortest string that parses back to the same f64
            write!(text, ",{p}").unwrap();
        }
        text.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    std::fs::write(&path, text).unwrap();

    let loaded = load_returns(&path).unwrap();
    let (mean, cov) = moments_from_prices(&prices, DAILY_PERIODS);
    assert_eq!(loaded.tickers, tickers);
    assert_eq!(loaded.dropped_rows, 0);
    assert_eq!(loaded.expected_returns, mean);
    assert_eq!(loaded.covariance, cov);
}
