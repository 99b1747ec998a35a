//! Bayesian optimization with two trust regions per iteration.
//!
//! Each iteration fits a noise-free Gaussian process to the observations and
//! proposes two candidates:
//!
//! * an *exploration* candidate, the acquisition maximizer inside a ball
//!   spanning the widest gap between evaluated points and the domain corners;
//! * an *exploitation* candidate, reached by projected gradient ascent on the
//!   posterior mean starting from the incumbent inside an adaptive ball.
//!
//! The candidate with the larger acquisition value is evaluated next. The
//! crate also ships the plain EGO loop used as a baseline, a suite of standard
//! test functions, a mean-variance portfolio objective and a benchmark harness
//! (normalized scores, Wilcoxon rank-sum marks, CSV/JSON reports).
//!
//! ```
//! use mtrbo::objectives::make_benchmark;
//! use mtrbo::optimizer::{run_mtrbo, MtrboConfig};
//!
//! let f = make_benchmark("Rastrigin", 2).unwrap();
//! let cfg = MtrboConfig { budget: 14, n0: 10, ..MtrboConfig::default() };
//! let trace = run_mtrbo(&f, f.domain(), &cfg).unwrap();
//! assert_eq!(trace.evaluations, 14);
//! ```

pub mod acquisition;
pub mod bench;
pub mod design;
mod error;
pub mod gp;
pub mod objectives;
pub mod optimizer;
pub mod trust;

pub use error::{Error, Result};

/// Euclidean distance between two points of equal dimension.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
