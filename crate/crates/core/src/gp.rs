//! Noise-free Gaussian-process regression with a squared-exponential kernel.
//!
//! [`GpModel`] is the plain interpolating posterior. [`Surrogate`] wraps it with
//! output standardization and maximum-likelihood length-scale selection, which
//! is what the optimizers use.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{squared_distance, Error, Result};

/// Points closer than this are treated as identical.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const SCALE_FLOOR_SQ: f64 = 1e-12;
/// Largest training residual, relative to `1 + |y|`, that a length scale may
/// leave and still count as interpolating during selection.
const SELECTION_RESIDUAL: f64 = 1e-9;

/// Hyperparameters of `k(a, b) = s² exp(-|a - b|² / 2l²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub scale_factor: f64,
    pub length_scale: f64,
    /// Added to the diagonal of the kernel matrix before factorization.
    pub jitter: f64,
}

impl KernelParams {
    pub fn new(scale_factor: f64, length_scale: f64, jitter: f64) -> Result<Self> {
        if !(scale_factor > 0.0 && length_scale > 0.0 && jitter >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel params must satisfy s > 0, l > 0, jitter >= 0 (got {scale_factor}, {length_scale}, {jitter})"
            )));
        }
        Ok(Self {
            scale_factor,
            length_scale,
            jitter,
        })
    }

    pub fn variance(&self) -> f64 {
        self.scale_factor * self.scale_factor
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            scale_factor: 1.0,
            length_scale: 1.0,
            jitter: 0.0,
        }
    }
}

/// Squared-exponential kernel.
///
/// Panics if `a` and `b` differ in dimension.
pub fn kernel(a: &[f64], b: &[f64], p: &KernelParams) -> f64 {
    let r2 = squared_distance(a, b);
    p.variance() * (-r2 / (2.0 * p.length_scale * p.length_scale)).exp()
}

/// Evaluated points and their objective values, in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    best_index: usize,
}

impl ObservationSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            values: Vec::new(),
            best_index: 0,
        }
    }

    pub fn from_points(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let dim = points.first().map_or(0, Vec::len);
        let mut set = Self::new(dim);
        for (x, y) in points.into_iter().zip(values) {
            set.push(x, y)?;
        }
        Ok(set)
    }

    /// Appends an observation, rejecting points that duplicate an existing one.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if self.points.is_empty() && self.dim == 0 {
            self.dim = x.len();
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some((other, d)) = self.nearest(&x) {
            if d < DUPLICATE_TOLERANCE {
                return Err(Error::DuplicatePoint {
                    index: self.points.len(),
                    other,
                    distance: d,
                });
            }
        }
        let index = self.values.len();
        // strict comparison keeps the lowest index on ties
        if self.values.is_empty() || y > self.values[self.best_index] {
            self.best_index = index;
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    /// Index of and distance to the nearest stored point.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, squared_distance(p, x)))
            .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
                Some((_, best)) if best <= d => acc,
                _ => Some((i, d)),
            })
            .map(|(i, d)| (i, d.sqrt()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best_point(&self) -> &[f64] {
        &self.points[self.best_index]
    }

    pub fn best_value(&self) -> f64 {
        self.values[self.best_index]
    }

    /// Copy of this set with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&y| f(y)).collect();
        let mut best_index = 0;
        for (i, &y) in values.iter().enumerate() {
            if y > values[best_index] {
                best_index = i;
            }
        }
        Self {
            dim: self.dim,
            points: self.points.clone(),
            values,
            best_index,
        }
    }

    fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = squared_distance(&self.points[i], &self.points[j]);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        (best.0, best.1, best.2.sqrt())
    }
}

/// Dense lower-triangular Cholesky factor stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix given row-major; `None` if not positive definite.
    pub fn factor(n: usize, a: &[f64]) -> Option<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.get(i, i).ln()).sum()
    }
}

fn kernel_matrix(points: &[Vec<f64>], p: &KernelParams, jitter: f64) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = kernel(&points[i], &points[j], p);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] = p.variance() + jitter;
    }
    k
}

/// Factors `K + jitter·I`, escalating the jitter tenfold from `1e-10·s²` up to
/// `1e-4·s²` when the requested jitter is not enough. Returns the factor and
/// the jitter that succeeded.
fn factor_with_jitter(data: &ObservationSet, p: &KernelParams) -> Result<(Cholesky, f64)> {
    let n = data.len();
    let base = kernel_matrix(data.points(), p, 0.0);
    let s2 = p.variance();
    let mut jitter = p.jitter;
    loop {
        let mut k = base.clone();
        for i in 0..n {
            k[i * n + i] += jitter;
        }
        if let Some(chol) = Cholesky::factor(n, &k) {
            return Ok((chol, jitter));
        }
        let next = (jitter * 10.0).max(JITTER_START * s2);
        if next > JITTER_MAX * s2 * (1.0 + 1e-9) {
            let (first, second, distance) = data.closest_pair();
            return Err(Error::SingularData {
                first,
                second,
                distance,
                jitter,
            });
        }
        jitter = next;
    }
}

/// Read access to a posterior: mean, variance and mean gradient.
pub trait Posterior {
    fn dim(&self) -> usize;
    fn mean(&self, x: &[f64]) -> f64;
    /// Non-negative posterior variance.
    fn variance(&self, x: &[f64]) -> f64;
    fn mean_gradient(&self, x: &[f64]) -> Vec<f64>;

    fn std_dev(&self, x: &[f64]) -> f64 {
        self.variance(x).sqrt()
    }

    /// Mean and variance together.
    fn moments(&self, x: &[f64]) -> (f64, f64) {
        (self.mean(x), self.variance(x))
    }
}

/// A fitted noise-free GP posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    data: ObservationSet,
    chol: Cholesky,
    weights: Vec<f64>,
    prior_mean: f64,
}

impl GpModel {
    /// Factors the kernel matrix and solves for the interpolation weights.
    pub fn fit(data: &ObservationSet, params: KernelParams, prior_mean: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig("cannot fit a GP to no data".into()));
        }
        let (chol, jitter) = factor_with_jitter(data, &params)?;
        let residual: Vec<f64> = data.values().iter().map(|y| y - prior_mean).collect();
        let weights = chol.solve(&residual);
        Ok(Self {
            params: KernelParams { jitter, ..params },
            data: data.clone(),
            chol,
            weights,
            prior_mean,
        })
    }

    /// Kernel parameters, with the jitter actually used by the factorization.
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn data(&self) -> &ObservationSet {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    fn cross_kernel(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .points()
            .iter()
            .map(|p| kernel(x, p, &self.params))
            .collect()
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(x.len(), self.data.dim(), "query dimension mismatch");
    }
}

impl Posterior for GpModel {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn mean(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let k = self.cross_kernel(x);
        self.prior_mean + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    fn variance(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let k = self.cross_kernel(x);
        let v = self.chol.forward(&k);
        let reduction: f64 = v.iter().map(|a| a * a).sum();
        (self.params.variance() - reduction).max(0.0)
    }

    fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        let l2 = self.params.length_scale * self.params.length_scale;
        let mut grad = vec![0.0; x.len()];
        for (p, w) in self.data.points().iter().zip(&self.weights) {
            let c = w * kernel(x, p, &self.params) / l2;
            for (g, (pi, xi)) in grad.iter_mut().zip(p.iter().zip(x)) {
                *g += c * (pi - xi);
            }
        }
        grad
    }

    fn moments(&self, x: &[f64]) -> (f64, f64) {
        self.check_dim(x);
        let k = self.cross_kernel(x);
        let mean = self.prior_mean + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        let v = self.chol.forward(&k);
        let reduction: f64 = v.iter().map(|a| a * a).sum();
        (mean, (self.params.variance() - reduction).max(0.0))
    }
}

/// `-½ rᵀK⁻¹r - ½ log|K| - (n/2) log 2π` with `r = values - prior_mean`.
pub fn log_marginal_likelihood(
    data: &ObservationSet,
    p: &KernelParams,
    prior_mean: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("log likelihood of no data".into()));
    }
    let (chol, _) = factor_with_jitter(data, p)?;
    let r: Vec<f64> = data.values().iter().map(|y| y - prior_mean).collect();
    let z = chol.forward(&r);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let n = data.len() as f64;
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * n * (2.0 * PI).ln())
}

/// Candidate length scales for maximum-likelihood selection: 25 log-spaced
/// values over `[1e-2, 1e1] × reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthScaleGrid {
    values: Vec<f64>,
}

impl LengthScaleGrid {
    pub const SIZE: usize = 25;

    pub fn new(reference: f64) -> Self {
        let (lo, hi) = (-2.0f64, 1.0f64);
        let values = (0..Self::SIZE)
            .map(|i| reference * 10f64.powf(lo + (hi - lo) * i as f64 / (Self::SIZE - 1) as f64))
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn midpoint(&self) -> f64 {
        self.values[self.values.len() / 2]
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }
}

/// Outcome of hyperparameter selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperFit {
    pub params: KernelParams,
    pub log_likelihood: f64,
    /// Set when no grid point could be factored and defaults were returned.
    pub fallback: bool,
}

fn profiled_fit(data: &ObservationSet, length_scale: f64) -> Option<(HyperFit, f64)> {
    let unit = KernelParams {
        scale_factor: 1.0,
        length_scale,
        jitter: 0.0,
    };
    let (chol, jitter) = factor_with_jitter(data, &unit).ok()?;
    let z = chol.forward(data.values());
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let n = data.len() as f64;
    let s2 = (quad / n).max(SCALE_FLOOR_SQ);
    let ll = -0.5 * quad / s2 - 0.5 * (n * s2.ln() + chol.log_det()) - 0.5 * n * (2.0 * PI).ln();
    let fit = HyperFit {
        params: KernelParams {
            scale_factor: s2.sqrt(),
            length_scale,
            jitter: jitter * s2,
        },
        log_likelihood: ll,
        fallback: false,
    };
    Some((fit, residual_ratio(data, &fit.params)))
}

/// Largest training residual of the model fitted with `params`, in units of
/// `SELECTION_RESIDUAL·(1 + |y|)`. Infinite when the factorization needed
/// jitter: a jittered solve of a near-singular matrix acts as observation
/// noise and its residuals are not reproducible under rescaling.
fn residual_ratio(data: &ObservationSet, params: &KernelParams) -> f64 {
    match GpModel::fit(data, *params, 0.0) {
        Ok(model) if model.params().jitter == 0.0 => data
            .points()
            .iter()
            .zip(data.values())
            .map(|(x, y)| (model.mean(x) - y).abs() / (SELECTION_RESIDUAL * (1.0 + y.abs())))
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

/// Picks the length scale maximizing the profiled marginal likelihood over
/// `grid`, with the scale factor in closed form `s² = rᵀK_l⁻¹r / n`.
/// Values are taken as residuals against a zero prior mean.
///
/// Only length scales that factor without jitter and whose fit interpolates
/// the data compete. The profiled likelihood rewards near-singular kernel
/// matrices on rough data, where the relative jitter turns into a large noise
/// term. When no candidate qualifies, the one with the smallest training
/// residual is taken, jittered ones last.
pub fn fit_hyperparameters(data: &ObservationSet, grid: &LengthScaleGrid) -> HyperFit {
    if data.values().iter().all(|y| y.abs() < 1e-12) {
        return HyperFit {
            params: KernelParams {
                scale_factor: SCALE_FLOOR_SQ.sqrt(),
                length_scale: grid.midpoint(),
                jitter: JITTER_START * SCALE_FLOOR_SQ,
            },
            log_likelihood: f64::NAN,
            fallback: false,
        };
    }
    let mut best: Option<(HyperFit, f64)> = None;
    for &l in grid.values() {
        if let Some((fit, ratio)) = profiled_fit(data, l) {
            let better = best.is_none_or(|(b, b_ratio)| match (ratio <= 1.0, b_ratio <= 1.0) {
                (true, true) => fit.log_likelihood > b.log_likelihood,
                (ok, b_ok) if ok != b_ok => ok,
                _ => ratio < b_ratio,
            });
            if better {
                best = Some((fit, ratio));
            }
        }
    }
    best.map(|(fit, _)| fit).unwrap_or(HyperFit {
        params: KernelParams {
            scale_factor: 1.0,
            length_scale: grid.midpoint(),
            jitter: JITTER_START,
        },
        log_likelihood: f64::NAN,
        fallback: true,
    })
}

/// Scale-factor fit at a fixed length scale.
pub fn fit_scale_factor(data: &ObservationSet, length_scale: f64) -> Option<HyperFit> {
    if data.values().iter().all(|y| y.abs() < 1e-12) {
        return Some(HyperFit {
            params: KernelParams {
                scale_factor: SCALE_FLOOR_SQ.sqrt(),
                length_scale,
                jitter: JITTER_START * SCALE_FLOOR_SQ,
            },
            log_likelihood: f64::NAN,
            fallback: false,
        });
    }
    profiled_fit(data, length_scale).map(|(fit, _)| fit)
}

/// GP on standardized outputs; all queries are reported in the original units.
#[derive(Debug, Clone)]
pub struct Surrogate {
    model: GpModel,
    offset: f64,
    scale: f64,
    hyper: HyperFit,
}

impl Surrogate {
    /// Standardizes values to zero mean and unit deviation, selects the length
    /// scale (or uses `fixed_length_scale`) and fits the posterior.
    pub fn fit(
        data: &ObservationSet,
        grid: &LengthScaleGrid,
        fixed_length_scale: Option<f64>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig(
                "cannot fit a surrogate to no data".into(),
            ));
        }
        let n = data.len() as f64;
        let offset = data.values().iter().sum::<f64>() / n;
        let var = data
            .values()
            .iter()
            .map(|y| (y - offset).powi(2))
            .sum::<f64>()
            / n;
        let mut scale = var.sqrt();
        if !(scale > 1e-12 * (1.0 + offset.abs())) {
            scale = 1.0;
        }
        let standardized = data.map_values(|y| (y - offset) / scale);
        let hyper = match fixed_length_scale {
            Some(l) => fit_scale_factor(&standardized, l).unwrap_or(HyperFit {
                params: KernelParams {
                    scale_factor: 1.0,
                    length_scale: l,
                    jitter: JITTER_START,
                },
                log_likelihood: f64::NAN,
                fallback: true,
            }),
            None => fit_hyperparameters(&standardized, grid),
        };
        let model = GpModel::fit(&standardized, hyper.params, 0.0)?;
        Ok(Self {
            model,
            offset,
            scale,
            hyper,
        })
    }

    /// The underlying model in standardized units.
    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn hyper(&self) -> &HyperFit {
        &self.hyper
    }

    pub fn output_offset(&self) -> f64 {
        self.offset
    }

    pub fn output_scale(&self) -> f64 {
        self.scale
    }
}

impl Posterior for Surrogate {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn mean(&self, x: &[f64]) -> f64 {
        self.offset + self.scale * self.model.mean(x)
    }

    fn variance(&self, x: &[f64]) -> f64 {
        self.scale * self.scale * self.model.variance(x)
    }

    fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.model.mean_gradient(x);
        g.iter_mut().for_each(|v| *v *= self.scale);
        g
    }

    fn moments(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.model.moments(x);
        (self.offset + self.scale * m, self.scale * self.scale * v)
    }
}
