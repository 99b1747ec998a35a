//! Mean-variance portfolio allocation and price-history ingestion.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ObjectiveFunction, Sense};
use crate::trust::Domain;
use crate::{Error, Result};

/// Trading days per year, used to annualize daily moments.
pub const DAILY_PERIODS: f64 = 252.0;

const SYMMETRY_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-8;
const WEIGHT_SUM_GUARD: f64 = 1e-9;
const RISK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    expected_returns: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    pub lambda: f64,
    pub risk_free_rate: f64,
}

impl PortfolioProblem {
    /// Validates the moments. A covariance whose smallest eigenvalue is below
    /// `-1e-8` gets its diagonal shifted up to bring it back to zero.
    pub fn new(expected_returns: Vec<f64>, covariance: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let n = expected_returns.len();
        if n == 0 {
            return Err(Error::InvalidConfig(
                "portfolio needs at least one asset".into(),
            ));
        }
        if covariance.len() != n || covariance.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.len(),
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1] (got {lambda})"
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if (covariance[i][j] - covariance[j][i]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidConfig(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut covariance = covariance;
        let m = DMatrix::from_fn(n, n, |i, j| covariance[i][j]);
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        if min_eig < EIGEN_FLOOR {
            for (i, row) in covariance.iter_mut().enumerate() {
                row[i] -= min_eig;
            }
        }
        Ok(Self {
            expected_returns,
            covariance,
            lambda,
            risk_free_rate: 0.0,
        })
    }

    pub fn from_returns(loaded: &LoadedReturns, lambda: f64) -> Result<Self> {
        Self::new(
            loaded.expected_returns.clone(),
            loaded.covariance.clone(),
            lambda,
        )
    }

    pub fn assets(&self) -> usize {
        self.expected_returns.len()
    }

    pub fn expected_returns(&self) -> &[f64] {
        &self.expected_returns
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// Maps raw box weights onto the simplex; uniform when they sum to ~0.
    pub fn normalize_weights(&self, w_raw: &[f64]) -> Result<Vec<f64>> {
        if w_raw.len() != self.assets() {
            return Err(Error::DimensionMismatch {
                expected: self.assets(),
                got: w_raw.len(),
            });
        }
        let total: f64 = w_raw.iter().sum();
        if total < WEIGHT_SUM_GUARD {
            return Ok(vec![1.0 / self.assets() as f64; self.assets()]);
        }
        Ok(w_raw.iter().map(|w| w / total).collect())
    }

    fn moments(&self, w: &[f64]) -> (f64, f64) {
        let ret = w
            .iter()
            .zip(&self.expected_returns)
            .map(|(a, b)| a * b)
            .sum();
        let risk = self
            .covariance
            .iter()
            .zip(w)
            .map(|(row, wi)| wi * row.iter().zip(w).map(|(s, wj)| s * wj).sum::<f64>())
            .sum();
        (ret, risk)
    }

    /// The problem as a maximization over raw weights in `[0, 1]^n`.
    pub fn objective_function(&self, name: impl Into<String>) -> Result<ObjectiveFunction> {
        let domain = Domain::cube(0.0, 1.0, self.assets())?;
        let problem = self.clone();
        Ok(ObjectiveFunction::new(
            name,
            domain,
            Sense::Maximize,
            move |w| portfolio_objective(&problem, w).unwrap_or(f64::NAN),
        ))
    }
}

/// `λ·πᵀω − (1−λ)·ωᵀΣω` with `ω` the normalized weights.
pub fn portfolio_objective(prob: &PortfolioProblem, w_raw: &[f64]) -> Result<f64> {
    let w = prob.normalize_weights(w_raw)?;
    let (ret, risk) = prob.moments(&w);
    Ok(prob.lambda * ret - (1.0 - prob.lambda) * risk)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioMetrics {
    pub weights: Vec<f64>,
    pub expected_return: f64,
    /// Portfolio variance `ωᵀΣω`.
    pub risk: f64,
    /// The optimized quantity, `λ·return − (1−λ)·risk`.
    pub objective: f64,
    /// `return − (1−λ)·risk`, the convention of published comparison tables
    /// for this problem. Equals `objective / λ` only when `λ = 1/2` and
    /// `risk = 0`; it is reported for comparison, never optimized.
    pub table_objective: f64,
    /// `(return − r_f) / risk`; absent when the risk is ~0.
    pub sharpe: Option<f64>,
}

impl PortfolioMetrics {
    /// Metrics from already-aggregated return and risk.
    pub fn from_moments(expected_return: f64, risk: f64, lambda: f64, risk_free_rate: f64) -> Self {
        Self {
            weights: Vec::new(),
            expected_return,
            risk,
            objective: lambda * expected_return - (1.0 - lambda) * risk,
            table_objective: expected_return - (1.0 - lambda) * risk,
            sharpe: (risk > RISK_FLOOR).then(|| (expected_return - risk_free_rate) / risk),
        }
    }
}

pub fn portfolio_metrics(prob: &PortfolioProblem, w_raw: &[f64]) -> Result<PortfolioMetrics> {
    let w = prob.normalize_weights(w_raw)?;
    let (ret, risk) = prob.moments(&w);
    Ok(PortfolioMetrics {
        weights: w,
        ..PortfolioMetrics::from_moments(ret, risk, prob.lambda, prob.risk_free_rate)
    })
}

/// Annualized moments estimated from a price history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedReturns {
    pub tickers: Vec<String>,
    pub expected_returns: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Rows skipped because a price was missing.
    pub dropped_rows: usize,
    /// Number of periodic returns used.
    pub periods: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || ["na", "nan", "null"].contains(&c.to_ascii_lowercase().as_str())
}

/// Simple returns between consecutive rows, annualized mean and sample
/// covariance (denominator `T − 1`, or 1 when only one return exists).
pub fn moments_from_prices(
    prices: &[Vec<f64>],
    periods_per_year: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = prices.first().map_or(0, Vec::len);
    let returns: Vec<Vec<f64>> = prices
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(p1, p0)| p1 / p0 - 1.0)
                .collect()
        })
        .collect();
    let t = returns.len() as f64;
    let mean: Vec<f64> = (0..n)
        .map(|j| returns.iter().map(|r| r[j]).sum::<f64>() / t)
        .collect();
    let denom = (t - 1.0).max(1.0);
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let c = returns
                .iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
                / denom
                * periods_per_year;
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    (mean.iter().map(|m| m * periods_per_year).collect(), cov)
}

pub fn load_returns(path: impl AsRef<Path>) -> Result<LoadedReturns> {
    load_returns_with(path, DAILY_PERIODS)
}

/// Reads `date,TICKER1,TICKER2,...` adjusted-close prices.
///
/// Rows with a missing price are dropped and counted. Row numbers in errors
/// are file line numbers (the header is line 1).
pub fn load_returns_with(path: impl AsRef<Path>, periods_per_year: f64) -> Result<LoadedReturns> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Ingestion {
            row: 1,
            message: "expected a date column followed by at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = headers
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();

    let mut prices = Vec::new();
    let mut dropped_rows = 0;
    let mut last_date: Option<String> = None;
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Ingestion {
            row,
            message: e.to_string(),
        })?;
        let date = record.get(0).unwrap_or("").trim().to_string();
        if let Some(prev) = &last_date {
            if date <= *prev {
                return Err(Error::Ingestion {
                    row,
                    message: format!("date {date} does not follow {prev}"),
                });
            }
        }
        last_date = Some(date);
        let cells: Vec<&str> = record.iter().skip(1).collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped_rows += 1;
            continue;
        }
        let parsed = cells
            .iter()
            .zip(&tickers)
            .map(|(c, t)| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|p| p.is_finite() && *p > 0.0)
                    .ok_or_else(|| Error::Ingestion {
                        row,
                        message: format!("invalid price `{c}` for {t}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        prices.push(parsed);
    }
    if prices.len() < 2 {
        return Err(Error::Ingestion {
            row: prices.len() + dropped_rows + 1,
            message: format!("need at least 2 usable rows, found {}", prices.len()),
        });
    }
    let (expected_returns, covariance) = moments_from_prices(&prices, periods_per_year);
    Ok(LoadedReturns {
        tickers,
        expected_returns,
        covariance,
        dropped_rows,
        periods: prices.len() - 1,
    })
}
