use std::f64::consts::{E, PI};

use super::{ObjectiveFunction, Sense};
use crate::trust::Domain;
use crate::{Error, Result};

pub const BENCHMARK_NAMES: [&str; 15] = [
    "Abs",
    "Ackley",
    "AckleyTest",
    "Eggholder",
    "Griewank",
    "Penalty2",
    "Quartic",
    "Rastrigin",
    "Rosenbrock",
    "Scheffer",
    "SchwefelDouble",
    "SchwefelMax",
    "SchwefelSin",
    "Stairs",
    "Weierstrass",
];

const WEIERSTRASS_A: f64 = 0.5;
const WEIERSTRASS_B: f64 = 3.0;
const WEIERSTRASS_KMAX: i32 = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchmarkOptions {
    /// Adds the uniform `[0, 1)` term to Quartic, derived from this seed and
    /// the query point. Off by default so every objective is deterministic.
    pub quartic_noise_seed: Option<u64>,
}

pub fn abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Ackley as tabulated: the first exponent uses the plain mean of squares.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    20.0 + E - 20.0 * (-0.2 * sq).exp() - cs.exp()
}

pub fn ackley_test(x: &[f64]) -> f64 {
    let c = (-0.2f64).exp();
    x.windows(2)
        .map(|w| {
            3.0 * ((2.0 * w[0]).cos() + (2.0 * w[1]).sin()) + c * (w[0] * w[0] + w[1] * w[1]).sqrt()
        })
        .sum()
}

pub fn eggholder(x: &[f64]) -> f64 {
    -x.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            (b + 47.0) * (b + 0.5 * a + 47.0).abs().sqrt().sin()
                + a * (a - b - 47.0).abs().sqrt().sin()
        })
        .sum::<f64>()
}

pub fn griewank(x: &[f64]) -> f64 {
    let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 2) as f64).sqrt()).cos())
        .product();
    1.0 + sum - prod
}

pub fn penalty2(x: &[f64]) -> f64 {
    let d = x.len();
    let wall: f64 = x.iter().map(|v| (v.abs() - 5.0).max(0.0).powi(2).powi(2)).sum();
    let first = 10.0 * (3.0 * PI * x[0]).sin().powi(2);
    let last = (x[d - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * x[d - 1] * x[d - 1]).sin());
    let middle: f64 = x
        .windows(2)
        .map(|w| (w[0] - 1.0).powi(2) * (1.0 + (3.0 * PI * w[1] * w[1]).sin()))
        .sum();
    100.0 * wall + 0.1 * (first + last + middle)
}

pub fn quartic(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (i + 2) as f64 * (v * v).powi(2))
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

pub fn scheffer(x: &[f64]) -> f64 {
    0.5 + x
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] * w[0], w[1] * w[1]);
            ((a - b).sin().powi(2) - 0.5) / (1.0 + 0.001 * (a + b)).powi(2)
        })
        .sum::<f64>()
}

pub fn schwefel_double(x: &[f64]) -> f64 {
    let mut partial = 0.0;
    let mut total = 0.0;
    for v in x {
        partial += v;
        total += partial * partial;
    }
    total
}

pub fn schwefel_max(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn schwefel_sin(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

pub fn stairs(x: &[f64]) -> f64 {
    x.iter().map(|v| (v + 0.5).floor().powi(2)).sum()
}

fn weierstrass_series(t: f64) -> f64 {
    (0..=WEIERSTRASS_KMAX)
        .map(|k| WEIERSTRASS_A.powi(k) * (WEIERSTRASS_B.powi(k) * PI * t).cos())
        .sum()
}

pub fn weierstrass(x: &[f64]) -> f64 {
    let offset = x.len() as f64 * weierstrass_series(0.5);
    x.iter().map(|v| weierstrass_series(v + 0.5)).sum::<f64>() - offset
}

fn domain_half_width(name: &str) -> f64 {
    match name {
        "Abs" => 10.0,
        "Ackley" => 4.0,
        "AckleyTest" => 30.0,
        "Eggholder" | "Griewank" => 600.0,
        "Penalty2" | "SchwefelDouble" => 60.0,
        "Quartic" => 1.0,
        "Rastrigin" => 5.0,
        "Rosenbrock" => 2.0,
        "Scheffer" => 7.0,
        "SchwefelMax" => 100.0,
        "SchwefelSin" => 500.0,
        "Stairs" => 6.0,
        "Weierstrass" => 0.6,
        _ => unreachable!("unregistered benchmark {name}"),
    }
}

/// Deterministic uniform `[0, 1)` value from a seed and the bits of a point.
fn point_noise(seed: u64, x: &[f64]) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in x {
        h ^= v.to_bits();
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h = (h ^ (h >> 30)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub fn make_benchmark(name: &str, dimension: usize) -> Result<ObjectiveFunction> {
    make_benchmark_with(name, dimension, BenchmarkOptions::default())
}

/// Builds a benchmark by (case-insensitive) name on its default cube domain.
/// All benchmarks are minimized.
pub fn make_benchmark_with(
    name: &str,
    dimension: usize,
    options: BenchmarkOptions,
) -> Result<ObjectiveFunction> {
    let canonical = BENCHMARK_NAMES
        .iter()
        .find(|n| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownBenchmark {
            name: name.to_string(),
            valid: BENCHMARK_NAMES.iter().map(|s| s.to_string()).collect(),
        })?;
    if dimension < 2 {
        return Err(Error::InvalidConfig(format!(
            "benchmark dimension must be at least 2 (got {dimension})"
        )));
    }
    let f: fn(&[f64]) -> f64 = match *canonical {
        "Abs" => abs,
        "Ackley" => ackley,
        "AckleyTest" => ackley_test,
        "Eggholder" => eggholder,
        "Griewank" => griewank,
        "Penalty2" => penalty2,
        "Quartic" => quartic,
        "Rastrigin" => rastrigin,
        "Rosenbrock" => rosenbrock,
        "Scheffer" => scheffer,
        "SchwefelDouble" => schwefel_double,
        "SchwefelMax" => schwefel_max,
        "SchwefelSin" => schwefel_sin,
        "Stairs" => stairs,
        "Weierstrass" => weierstrass,
        _ => unreachable!(),
    };
    let w = domain_half_width(canonical);
    let domain = Domain::cube(-w, w, dimension)?;
    Ok(match (*canonical, options.quartic_noise_seed) {
        ("Quartic", Some(seed)) => {
            ObjectiveFunction::new(*canonical, domain, Sense::Minimize, move |x| {
                quartic(x) + point_noise(seed, x)
            })
        }
        _ => ObjectiveFunction::new(*canonical, domain, Sense::Minimize, f),
    })
}
