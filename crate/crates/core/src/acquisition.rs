//! Probability of improvement, expected improvement and upper confidence
//! bound, plus their maximization over a trust region.
//!
//! All three follow the maximization convention: improvement means a value
//! above the incumbent, `z = (μ - f*) / σ`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::gp::Posterior;
use crate::trust::{project_region, sample_in_region, Domain, TrustRegion};
use crate::{Error, Result};

/// Below this posterior standard deviation the closed forms degenerate.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Pi,
    Ei,
    Ucb,
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" => Ok(Self::Pi),
            "ei" => Ok(Self::Ei),
            "ucb" => Ok(Self::Ucb),
            other => Err(Error::InvalidConfig(format!(
                "unknown acquisition `{other}` (expected pi, ei or ucb)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    /// UCB exploration weight.
    pub beta: f64,
    /// Best observed value so far; unused by UCB.
    pub incumbent: f64,
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind, beta: f64, incumbent: f64) -> Self {
        Self {
            kind,
            beta,
            incumbent,
        }
    }

    /// Acquisition value for a Gaussian predictive `N(mean, sigma²)`.
    pub fn from_moments(&self, mean: f64, sigma: f64) -> f64 {
        let improvement = mean - self.incumbent;
        match self.kind {
            AcquisitionKind::Ucb => mean + self.beta * sigma,
            AcquisitionKind::Pi if sigma <= SIGMA_FLOOR => {
                if improvement > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            AcquisitionKind::Ei if sigma <= SIGMA_FLOOR => improvement.max(0.0),
            AcquisitionKind::Pi => normal_cdf(improvement / sigma),
            AcquisitionKind::Ei => {
                let z = improvement / sigma;
                (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
            }
        }
    }

    pub fn evaluate<P: Posterior + ?Sized>(&self, model: &P, x: &[f64]) -> f64 {
        let (mean, variance) = model.moments(x);
        self.from_moments(mean, variance.sqrt())
    }
}

/// Multi-start projected ascent settings for acquisition maximization.
/// Uniform draws screened per multi-start seed.
pub const SCREEN_DRAWS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptimizer {
    pub starts: usize,
    pub max_steps: usize,
    pub max_halvings: usize,
    /// Finite-difference step relative to the region radius.
    pub fd_step: f64,
}

impl Default for InnerOptimizer {
    fn default() -> Self {
        Self {
            starts: 10,
            max_steps: 100,
            max_halvings: 20,
            fd_step: 1e-6,
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Larger value wins; equal values go to the lexicographically smaller point.
fn better(cand: (&[f64], f64), cur: (&[f64], f64)) -> bool {
    cand.1 > cur.1 || (cand.1 == cur.1 && lex_less(cand.0, cur.0))
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    h: f64,
    region: &TrustRegion,
    dom: &Domain,
) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let lo = (x[i] - h).max(dom.lower()[i]);
        let hi = (x[i] + h).min(dom.upper()[i]);
        if hi <= lo {
            continue;
        }
        probe[i] = hi;
        let f_hi = f(&project_region(&probe, region, dom));
        probe[i] = lo;
        let f_lo = f(&project_region(&probe, region, dom));
        probe[i] = x[i];
        grad[i] = (f_hi - f_lo) / (hi - lo);
    }
    grad
}

/// Projected ascent from `start`; returns the polished point and its value.
fn ascend<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: Vec<f64>,
    region: &TrustRegion,
    dom: &Domain,
    opt: &InnerOptimizer,
) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut value = f(&x);
    let h = opt.fd_step * region.radius;
    let max_step = 0.25 * region.radius;
    let mut step = max_step;
    for _ in 0..opt.max_steps {
        let g = fd_gradient(f, &x, h, region, dom);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        let mut improved = false;
        for _ in 0..=opt.max_halvings {
            let cand: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(v, gi)| v + step * gi / norm)
                .collect();
            let cand = project_region(&cand, region, dom);
            let v = f(&cand);
            if v > value {
                x = cand;
                value = v;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        step = (2.0 * step).min(max_step);
    }
    (x, value)
}

/// The `count` best of `count × SCREEN_DRAWS` uniform draws from the region,
/// in draw order among equal values.
fn screened_starts<F, R>(
    objective: &F,
    region: &TrustRegion,
    dom: &Domain,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut pool: Vec<(Vec<f64>, f64)> = (0..count * SCREEN_DRAWS)
        .map(|_| {
            let x = sample_in_region(rng, region, dom);
            let v = objective(&x);
            (x, if v.is_nan() { f64::NEG_INFINITY } else { v })
        })
        .collect();
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    pool.into_iter().take(count).map(|(x, _)| x).collect()
}

/// Maximizes `objective` over `region ∩ dom` by multi-start projected ascent.
///
/// Starts are the best of a larger uniform sample of the ball moved into the
/// box, so that flat regions of the acquisition (EI underflows to exactly zero
/// far below the incumbent) do not trap every start. Each is polished by
/// ascent with finite-difference gradients and step halving. The best polished
/// point wins, ties going to the lexicographically smallest.
pub fn maximize<F, R>(
    objective: F,
    region: &TrustRegion,
    dom: &Domain,
    opt: &InnerOptimizer,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if !(region.radius > 0.0) || !region.intersects(dom) {
        return Err(Error::InfeasibleRegion);
    }
    let starts = screened_starts(&objective, region, dom, opt.starts.max(1), rng);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, v) = ascend(&objective, s, region, dom, opt);
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        match &best {
            Some((bx, bv)) if !better((&x, v), (bx, *bv)) => {}
            _ => best = Some((x, v)),
        }
    }
    Ok(best.expect("at least one start"))
}

/// Maximizes the acquisition over `region ∩ dom`.
pub fn maximize_in_region<P, R>(
    spec: &AcquisitionSpec,
    model: &P,
    region: &TrustRegion,
    dom: &Domain,
    opt: &InnerOptimizer,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)>
where
    P: Posterior + ?Sized,
    R: Rng + ?Sized,
{
    maximize(|x| spec.evaluate(model, x), region, dom, opt, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{GpModel, KernelParams, ObservationSet};
    use crate::trust::Flavor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: AcquisitionKind, beta: f64, incumbent: f64) -> AcquisitionSpec {
        AcquisitionSpec::new(kind, beta, incumbent)
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(
            spec(AcquisitionKind::Pi, 0.0, 0.7).from_moments(0.7, 1.0),
            0.5
        );
        let ei = spec(AcquisitionKind::Ei, 0.0, 0.0).from_moments(1.0, 1.0);
        assert!((ei - 1.083316).abs() < 1e-6);
        assert_eq!(
            spec(AcquisitionKind::Ucb, 2.0, 0.0).from_moments(1.0, 0.5),
            2.0
        );
    }

    #[test]
    fn degenerate_sigma() {
        let ei = spec(AcquisitionKind::Ei, 0.0, 1.0);
        assert_eq!(ei.from_moments(1.0, 0.0), 0.0);
        assert_eq!(ei.from_moments(1.5, 0.0), 0.5);
        let pi = spec(AcquisitionKind::Pi, 0.0, 1.0);
        assert_eq!(pi.from_moments(1.0, 0.0), 0.0);
        assert_eq!(pi.from_moments(1.2, 1e-13), 1.0);
    }

    #[test]
    fn ei_non_decreasing_in_sigma_below_incumbent() {
        let s = spec(AcquisitionKind::Ei, 0.0, 1.0);
        for &mu in &[1.0, 0.5, -2.0] {
            let vals: Vec<f64> = (0..200)
                .map(|i| s.from_moments(mu, i as f64 * 0.05))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0]), "mu = {mu}");
        }
    }

    #[test]
    fn parse_kind() {
        assert_eq!(
            "EI".parse::<AcquisitionKind>().unwrap(),
            AcquisitionKind::Ei
        );
        assert!("logei".parse::<AcquisitionKind>().is_err());
    }

    #[test]
    fn infeasible_region() {
        let dom = Domain::cube(0.0, 1.0, 2).unwrap();
        let region = TrustRegion {
            center: vec![3.0, 3.0],
            radius: 0.5,
            flavor: Flavor::Explore,
        };
        let data = ObservationSet::from_points(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let m = GpModel::fit(&data, KernelParams::default(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = maximize_in_region(
            &spec(AcquisitionKind::Ei, 0.0, 0.0),
            &m,
            &region,
            &dom,
            &InnerOptimizer::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::InfeasibleRegion)));
    }

    #[test]
    fn tie_break_is_lexicographic() {
        assert!(better((&[0.0, 1.0], 1.0), (&[0.5, 0.0], 1.0)));
        assert!(!better((&[0.5, 0.0], 1.0), (&[0.0, 1.0], 1.0)));
        assert!(better((&[0.9], 2.0), (&[0.0], 1.0)));
    }
}
