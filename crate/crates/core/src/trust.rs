//! Trust regions: the search box, the exploration ball built from the widest
//! nearest-neighbor gap, projections, and the exploitation sub-loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gp::Posterior;
use crate::{distance, Error, Result};

/// Above this dimension the corner set is subsampled instead of enumerated.
pub const FULL_CORNER_MAX_DIM: usize = 10;

/// Tolerance of the closed-ball membership test.
pub const BALL_TOLERANCE: f64 = 1e-9;

/// Axis-aligned search box together with the corner set used as anchor
/// points by the exploration region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    extreme_points: Vec<Vec<f64>>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::with_corner_seed(lower, upper, 0)
    }

    /// Corners are enumerated in binary order (bit `i` set selects the upper
    /// bound of coordinate `i`) for `D <= 10`. Larger boxes keep the all-lower
    /// and all-upper corners plus `2·D` distinct corners drawn with `seed`.
    pub fn with_corner_seed(lower: Vec<f64>, upper: Vec<f64>, seed: u64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidConfig(
                "domain needs at least one coordinate".into(),
            ));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidConfig(format!(
                "coordinate {i}: lower bound {} is not below upper bound {}",
                lower[i], upper[i]
            )));
        }
        let d = lower.len();
        let corner = |bits: &dyn Fn(usize) -> bool| -> Vec<f64> {
            (0..d)
                .map(|i| if bits(i) { upper[i] } else { lower[i] })
                .collect()
        };
        let extreme_points = if d <= FULL_CORNER_MAX_DIM {
            (0..1usize << d)
                .map(|k| corner(&|i| k >> i & 1 == 1))
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<Vec<f64>> = vec![corner(&|_| false), corner(&|_| true)];
            while out.len() < 2 * d + 2 {
                let bits: Vec<bool> = (0..d).map(|_| rng.random()).collect();
                let c = corner(&|i| bits[i]);
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            out
        };
        Ok(Self {
            lower,
            upper,
            extreme_points,
        })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extreme_points(&self) -> &[Vec<f64>] {
        &self.extreme_points
    }

    pub fn diagonal(&self) -> f64 {
        distance(&self.lower, &self.upper)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// The trust region that covers the whole box.
    pub fn whole(&self) -> TrustRegion {
        TrustRegion {
            center: self.center(),
            radius: 0.5 * self.diagonal(),
            flavor: Flavor::Explore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Explore,
    Exploit,
}

/// Closed ball intersected with the domain box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    pub center: Vec<f64>,
    pub radius: f64,
    pub flavor: Flavor,
}

impl TrustRegion {
    pub fn in_ball(&self, x: &[f64]) -> bool {
        distance(x, &self.center) <= self.radius + BALL_TOLERANCE
    }

    pub fn contains(&self, x: &[f64], dom: &Domain) -> bool {
        self.in_ball(x) && dom.contains(x)
    }

    /// Whether the ball reaches the box at all.
    pub fn intersects(&self, dom: &Domain) -> bool {
        let nearest = project_box(&self.center, dom);
        distance(&nearest, &self.center) <= self.radius + BALL_TOLERANCE
    }
}

/// Output of [`build_exploration_region`], kept for tracing and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationGap {
    /// Largest nearest-neighbor distance over samples and corners.
    pub gap: f64,
    /// Index of the point attaining the gap in the combined list
    /// (corners first, then samples).
    pub p_index: usize,
    /// Index of its nearest neighbor.
    pub q_index: usize,
    pub region: TrustRegion,
}

/// Finds the point of `corners ∪ samples` whose nearest neighbor is farthest
/// away and returns the ball spanning that pair.
///
/// The combined list holds the domain corners first, then the samples; ties
/// resolve to the lowest index. Panics when fewer than two points exist.
pub fn exploration_gap(samples: &[Vec<f64>], dom: &Domain) -> ExplorationGap {
    let all: Vec<&[f64]> = dom
        .extreme_points()
        .iter()
        .chain(samples)
        .map(Vec::as_slice)
        .collect();
    assert!(
        all.len() >= 2,
        "exploration region needs at least two points"
    );

    let nearest_of = |i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, x) in all.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = distance(all[i], x);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    };

    let (mut p, mut q, mut gap) = (0, 0, f64::NEG_INFINITY);
    for i in 0..all.len() {
        let (j, d) = nearest_of(i);
        if d > gap {
            (p, q, gap) = (i, j, d);
        }
    }
    let center = all[p]
        .iter()
        .zip(all[q])
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    ExplorationGap {
        gap,
        p_index: p,
        q_index: q,
        region: TrustRegion {
            center,
            radius: 0.5 * gap,
            flavor: Flavor::Explore,
        },
    }
}

/// The exploration trust region: center `(x_p + x_q)/2`, radius `d/2`.
pub fn build_exploration_region(samples: &[Vec<f64>], dom: &Domain) -> TrustRegion {
    exploration_gap(samples, dom).region
}

/// Per-coordinate clamp onto the box.
pub fn project_box(x: &[f64], dom: &Domain) -> Vec<f64> {
    x.iter()
        .zip(dom.lower.iter().zip(&dom.upper))
        .map(|(v, (a, b))| v.clamp(*a, *b))
        .collect()
}

fn project_ball(x: &mut [f64], center: &[f64], radius: f64) {
    let d = distance(x, center);
    if d > radius {
        let t = radius / d;
        for (v, c) in x.iter_mut().zip(center) {
            *v = c + (*v - c) * t;
        }
    }
}

/// Projects onto ball ∩ box by alternating ball and box projections.
///
/// At most ten rounds are run. If the ball is still violated afterwards the
/// point slides toward the box point nearest the center, stopping where it
/// enters the ball. Both ends of that segment lie in the box, so the result
/// satisfies both constraints whenever the region meets the box.
pub fn project_region(x: &[f64], region: &TrustRegion, dom: &Domain) -> Vec<f64> {
    let mut cur = x.to_vec();
    if region.contains(&cur, dom) {
        return cur;
    }
    for _ in 0..10 {
        let prev = cur.clone();
        project_ball(&mut cur, &region.center, region.radius);
        cur = project_box(&cur, dom);
        if distance(&prev, &cur) < 1e-12 {
            break;
        }
    }
    if !region.in_ball(&cur) {
        let anchor = project_box(&region.center, dom);
        if !region.in_ball(&anchor) {
            return anchor;
        }
        // smallest t with |cur + t·(anchor − cur) − center| = radius
        let dir: Vec<f64> = anchor.iter().zip(&cur).map(|(a, c)| a - c).collect();
        let off: Vec<f64> = cur.iter().zip(&region.center).map(|(c, o)| c - o).collect();
        let a: f64 = dir.iter().map(|v| v * v).sum();
        let b: f64 = dir.iter().zip(&off).map(|(u, v)| u * v).sum();
        let c: f64 = off.iter().map(|v| v * v).sum::<f64>() - region.radius * region.radius;
        let t = ((-b - (b * b - a * c).max(0.0).sqrt()) / a).clamp(0.0, 1.0);
        let moved: Vec<f64> = cur.iter().zip(&dir).map(|(x, u)| x + t * u).collect();
        cur = if region.in_ball(&moved) {
            project_box(&moved, dom)
        } else {
            anchor
        };
    }
    cur
}

/// Uniform draw from the ball, moved onto ball ∩ box.
pub(crate) fn sample_in_region<R: Rng + ?Sized>(
    rng: &mut R,
    region: &TrustRegion,
    dom: &Domain,
) -> Vec<f64> {
    let d = region.center.len();
    let dir: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let norm = dir
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let r = region.radius * rng.random::<f64>().powf(1.0 / d as f64);
    let x: Vec<f64> = region
        .center
        .iter()
        .zip(&dir)
        .map(|(c, u)| c + r * u / norm)
        .collect();
    project_region(&x, region, dom)
}

/// Settings of the exploitation sub-loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploitParams {
    pub gamma_inc: f64,
    pub gamma_dec: f64,
    pub eta_inc: f64,
    /// Gradient step, in units of `diagonal / sqrt(D)` of the domain.
    pub delta: f64,
    pub subiters: usize,
    pub r0: f64,
}

impl Default for ExploitParams {
    fn default() -> Self {
        Self {
            gamma_inc: 2.0,
            gamma_dec: 0.5,
            eta_inc: 0.01,
            delta: 0.1,
            subiters: 15,
            r0: 0.5,
        }
    }
}

impl ExploitParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_inc > 1.0
            && self.gamma_dec > 0.0
            && self.gamma_dec < 1.0
            && self.eta_inc > 0.0
            && self.delta > 0.0
            && self.subiters > 0
            && self.r0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid exploitation parameters: {self:?}"
            )))
        }
    }

    /// The radius update: grow on sufficient posterior-mean gain, else shrink.
    pub fn next_radius(&self, radius: f64, gain: f64) -> f64 {
        if gain > self.eta_inc * radius {
            self.gamma_inc * radius
        } else {
            self.gamma_dec * radius
        }
    }
}

/// One exploitation iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitStep {
    pub point: Vec<f64>,
    pub radius: f64,
    pub mean: f64,
}

/// Projected gradient ascent on the posterior mean from `start`.
///
/// Runs exactly `subiters` steps. Each step moves along `δ·∇μ`, clamps to the
/// box and then into the ball of the current radius around the current
/// iterate. A step that would lower the mean is rejected (the iterate stays
/// put and the radius shrinks). The returned trace starts with `start` and has
/// `subiters + 1` entries.
pub fn exploit<P: Posterior + ?Sized>(
    model: &P,
    start: &[f64],
    dom: &Domain,
    p: &ExploitParams,
) -> (Vec<f64>, Vec<ExploitStep>) {
    let diag = dom.diagonal();
    let (r_min, r_max) = (1e-6 * diag, diag);
    let step = p.delta * diag / (dom.dim() as f64).sqrt();

    let mut x = start.to_vec();
    let mut mu = model.mean(&x);
    let mut radius = p.r0.clamp(r_min, r_max);
    let mut trace = Vec::with_capacity(p.subiters + 1);
    trace.push(ExploitStep {
        point: x.clone(),
        radius,
        mean: mu,
    });

    for _ in 0..p.subiters {
        let grad = model.mean_gradient(&x);
        let moved: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v + step * g).collect();
        let region = TrustRegion {
            center: x.clone(),
            radius,
            flavor: Flavor::Exploit,
        };
        let candidate = project_region(&project_box(&moved, dom), &region, dom);
        let cand_mu = model.mean(&candidate);
        let gain = cand_mu - mu;
        if gain >= 0.0 {
            x = candidate;
            mu = cand_mu;
        }
        radius = p.next_radius(radius, gain.max(0.0)).clamp(r_min, r_max);
        trace.push(ExploitStep {
            point: x.clone(),
            radius,
            mean: mu,
        });
    }
    (x, trace)
}
