//! Objective functions: the benchmark suite and the mean-variance portfolio.

mod benchmarks;
mod portfolio;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::trust::Domain;

pub use benchmarks::{
    abs, ackley, ackley_test, eggholder, griewank, make_benchmark, make_benchmark_with, penalty2,
    quartic, rastrigin, rosenbrock, scheffer, schwefel_double, schwefel_max, schwefel_sin, stairs,
    weierstrass, BenchmarkOptions, BENCHMARK_NAMES,
};
pub use portfolio::{
    load_returns, load_returns_with, moments_from_prices, portfolio_metrics, portfolio_objective,
    LoadedReturns, PortfolioMetrics, PortfolioProblem, DAILY_PERIODS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Maps a value in this sense to the internal maximization scale.
    /// The map is its own inverse.
    pub fn to_internal(self, value: f64) -> f64 {
        match self {
            Sense::Maximize => value,
            Sense::Minimize => -value,
        }
    }

    pub fn from_internal(self, value: f64) -> f64 {
        self.to_internal(value)
    }

    /// Whether `a` is at least as good as `b`.
    pub fn at_least_as_good(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Maximize => a >= b,
            Sense::Minimize => a <= b,
        }
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named black-box function over a box domain.
#[derive(Clone)]
pub struct ObjectiveFunction {
    name: String,
    domain: Domain,
    sense: Sense,
    evaluator: Evaluator,
}

impl ObjectiveFunction {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        sense: Sense,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            sense,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }
}

impl fmt::Debug for ObjectiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("sense", &self.sense)
            .finish_non_exhaustive()
    }
}
