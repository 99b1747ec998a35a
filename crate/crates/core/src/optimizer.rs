//! The multiple-trust-region loop, the EGO baseline and the ablation modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_in_region, AcquisitionKind, AcquisitionSpec, InnerOptimizer};
use crate::design::latin_hypercube;
use crate::gp::{LengthScaleGrid, ObservationSet, Surrogate};
use crate::objectives::ObjectiveFunction;
use crate::trust::{build_exploration_region, exploit, project_box, Domain, ExploitParams};
use crate::{Error, Result};

/// A new query closer than this to an existing point is perturbed.
pub const DUPLICATE_RADIUS: f64 = 1e-9;
/// Perturbation size relative to the domain diagonal.
pub const PERTURBATION: f64 = 1e-6;
/// EGO searches the whole box, so it gets this many times more starts.
pub const EGO_START_FACTOR: usize = 4;

const DESIGN_STREAM: u64 = 0;
const INNER_STREAM: u64 = 1;
const PERTURB_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    ExploreOnly,
    ExploitOnly,
    Ego,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::ExploreOnly => "explore_only",
            Mode::ExploitOnly => "exploit_only",
            Mode::Ego => "ego",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "mtrbo" => Ok(Mode::Full),
            "explore_only" => Ok(Mode::ExploreOnly),
            "exploit_only" => Ok(Mode::ExploitOnly),
            "ego" => Ok(Mode::Ego),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}` (expected full, explore_only, exploit_only or ego)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MtrboConfig {
    /// Total objective evaluations, initial design included.
    pub budget: usize,
    pub n0: usize,
    pub exploit: ExploitParams,
    pub acquisition: AcquisitionKind,
    /// UCB exploration weight.
    pub beta: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Fixed kernel length scale; selected by maximum likelihood when unset.
    pub length_scale: Option<f64>,
    pub inner: InnerOptimizer,
}

impl Default for MtrboConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            n0: 10,
            exploit: ExploitParams::default(),
            acquisition: AcquisitionKind::Ei,
            beta: 2.0,
            seed: 0,
            mode: Mode::Full,
            length_scale: None,
            inner: InnerOptimizer::default(),
        }
    }
}

impl MtrboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::InvalidConfig(format!(
                "n0 must be at least 2 (got {})",
                self.n0
            )));
        }
        if self.budget <= self.n0 {
            return Err(Error::InvalidConfig(format!(
                "budget ({}) must exceed n0 ({})",
                self.budget, self.n0
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be finite and non-negative (got {})",
                self.beta
            )));
        }
        if let Some(l) = self.length_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "length_scale must be positive (got {l})"
                )));
            }
        }
        if self.inner.starts == 0 || self.inner.max_steps == 0 || !(self.inner.fd_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid inner optimizer: {:?}",
                self.inner
            )));
        }
        self.exploit.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Explored,
    Exploited,
    /// EGO iterate, chosen over the whole box.
    Global,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Explored => "explored",
            Stage::Exploited => "exploited",
            Stage::Global => "global",
        }
    }
}

/// What the exploitation sub-loop did during one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitSummary {
    pub start_mean: f64,
    pub end_mean: f64,
    pub final_radius: f64,
    /// Sub-iterations whose step was kept.
    pub accepted: usize,
}

/// One objective evaluation. Values are in the objective's own sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based evaluation index.
    pub iteration: usize,
    pub stage: Stage,
    pub query: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
    pub explore_radius: Option<f64>,
    /// Acquisition at the exploration candidate (internal maximization scale).
    pub explore_acq: Option<f64>,
    /// Acquisition at the exploitation candidate (internal maximization scale).
    pub exploit_acq: Option<f64>,
    pub exploit: Option<ExploitSummary>,
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub mode: Mode,
    pub records: Vec<IterationRecord>,
    pub x_opt: Vec<f64>,
    pub f_opt: f64,
    pub evaluations: usize,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Moves `x` off existing observations by a random offset of fixed length.
fn deduplicate<R: Rng + ?Sized>(
    x: Vec<f64>,
    data: &ObservationSet,
    dom: &Domain,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let collides = |p: &[f64]| data.nearest(p).is_some_and(|(_, d)| d <= DUPLICATE_RADIUS);
    if !collides(&x) {
        return (x, false);
    }
    let size = PERTURBATION * dom.diagonal();
    let mut candidate = x.clone();
    for _ in 0..64 {
        let dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            continue;
        }
        let moved: Vec<f64> = x
            .iter()
            .zip(&dir)
            .map(|(v, d)| v + size * d / norm)
            .collect();
        candidate = project_box(&moved, dom);
        if !collides(&candidate) {
            break;
        }
    }
    (candidate, true)
}

struct Proposal {
    point: Vec<f64>,
    stage: Stage,
    explore_radius: Option<f64>,
    explore_acq: Option<f64>,
    exploit_acq: Option<f64>,
    exploit: Option<ExploitSummary>,
}

fn propose<R: Rng + ?Sized>(
    model: &Surrogate,
    data: &ObservationSet,
    dom: &Domain,
    cfg: &MtrboConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<Proposal> {
    let spec = AcquisitionSpec::new(cfg.acquisition, cfg.beta, data.best_value());
    if mode == Mode::Ego {
        let region = dom.whole();
        let opt = InnerOptimizer {
            starts: cfg.inner.starts * EGO_START_FACTOR,
            ..cfg.inner
        };
        let (x, a) = maximize_in_region(&spec, model, &region, dom, &opt, rng)?;
        return Ok(Proposal {
            point: x,
            stage: Stage::Global,
            explore_radius: Some(region.radius),
            explore_acq: Some(a),
            exploit_acq: None,
            exploit: None,
        });
    }

    let explored = if mode == Mode::ExploitOnly {
        None
    } else {
        let region = build_exploration_region(data.points(), dom);
        let (x, a) = maximize_in_region(&spec, model, &region, dom, &cfg.inner, rng)?;
        Some((x, a, region.radius))
    };
    let exploited = if mode == Mode::ExploreOnly {
        None
    } else {
        let (x, steps) = exploit(model, data.best_point(), dom, &cfg.exploit);
        let summary = ExploitSummary {
            start_mean: steps[0].mean,
            end_mean: steps[steps.len() - 1].mean,
            final_radius: steps[steps.len() - 1].radius,
            accepted: steps
                .windows(2)
                .filter(|w| w[1].point != w[0].point)
                .count(),
        };
        let a = spec.evaluate(model, &x);
        Some((x, a, summary))
    };

    let explore_radius = explored.as_ref().map(|e| e.2);
    let explore_acq = explored.as_ref().map(|e| e.1);
    let exploit_acq = exploited.as_ref().map(|e| e.1);
    let (point, stage, exploit_summary) = match (explored, exploited) {
        (Some((xs, a_s, _)), Some((xss, a_ss, summary))) => {
            if a_s > a_ss {
                (xs, Stage::Explored, Some(summary))
            } else {
                (xss, Stage::Exploited, Some(summary))
            }
        }
        (Some((xs, _, _)), None) => (xs, Stage::Explored, None),
        (None, Some((xss, _, summary))) => (xss, Stage::Exploited, Some(summary)),
        (None, None) => unreachable!("every mode proposes at least one candidate"),
    };
    Ok(Proposal {
        point,
        stage,
        explore_radius,
        explore_acq,
        exploit_acq,
        exploit: exploit_summary,
    })
}

fn run(f: &ObjectiveFunction, dom: &Domain, cfg: &MtrboConfig, mode: Mode) -> Result<RunTrace> {
    cfg.validate()?;
    if dom.dim() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            got: dom.dim(),
        });
    }
    let sense = f.sense();
    let mut design_rng = stream(cfg.seed, DESIGN_STREAM);
    let mut inner_rng = stream(cfg.seed, INNER_STREAM);
    let mut perturb_rng = stream(cfg.seed, PERTURB_STREAM);

    let mut data = ObservationSet::new(dom.dim());
    let mut records = Vec::with_capacity(cfg.budget);
    let mut evaluate =
        |x: Vec<f64>, proposal: Option<Proposal>, data: &mut ObservationSet| -> Result<()> {
            let (x, perturbed) = deduplicate(x, data, dom, &mut perturb_rng);
            let raw = f.evaluate(&x);
            if !raw.is_finite() {
                return Err(Error::NonFiniteObjective {
                    point: x,
                    value: raw,
                });
            }
            data.push(x.clone(), sense.to_internal(raw))?;
            let p = proposal.unwrap_or(Proposal {
                point: Vec::new(),
                stage: Stage::Initial,
                explore_radius: None,
                explore_acq: None,
                exploit_acq: None,
                exploit: None,
            });
            records.push(IterationRecord {
                iteration: data.len(),
                stage: p.stage,
                query: x,
                value: raw,
                best_so_far: sense.from_internal(data.best_value()),
                explore_radius: p.explore_radius,
                explore_acq: p.explore_acq,
                exploit_acq: p.exploit_acq,
                exploit: p.exploit,
                perturbed,
            });
            Ok(())
        };

    for x in latin_hypercube(cfg.n0, dom, &mut design_rng) {
        evaluate(x, None, &mut data)?;
    }
    let grid = LengthScaleGrid::new(dom.diagonal() / (dom.dim() as f64).sqrt());
    while data.len() < cfg.budget {
        let model = Surrogate::fit(&data, &grid, cfg.length_scale)?;
        let mut proposal = propose(&model, &data, dom, cfg, mode, &mut inner_rng)?;
        let x = std::mem::take(&mut proposal.point);
        evaluate(x, Some(proposal), &mut data)?;
    }

    Ok(RunTrace {
        mode,
        records,
        x_opt: data.best_point().to_vec(),
        f_opt: sense.from_internal(data.best_value()),
        evaluations: data.len(),
    })
}

/// Runs the two-trust-region loop (`cfg.mode` is ignored).
pub fn run_mtrbo(f: &ObjectiveFunction, dom: &Domain, cfg: &MtrboConfig) -> Result<RunTrace> {
    run(f, dom, cfg, Mode::Full)
}

/// Runs plain EGO: the acquisition is maximized over the whole box
/// (`cfg.mode` is ignored).
pub fn run_ego(f: &ObjectiveFunction, dom: &Domain, cfg: &MtrboConfig) -> Result<RunTrace> {
    run(f, dom, cfg, Mode::Ego)
}

/// Runs the variant selected by `cfg.mode`.
pub fn run_ablation(f: &ObjectiveFunction, dom: &Domain, cfg: &MtrboConfig) -> Result<RunTrace> {
    run(f, dom, cfg, cfg.mode)
}

impl RunTrace {
    /// Posterior-independent view of the incumbent: one entry per evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }

    /// Evaluations that came out of the Bayesian-optimization loop.
    pub fn iterations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.stage != Stage::Initial)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_benchmark, Sense};

    fn constant(dim: usize) -> ObjectiveFunction {
        ObjectiveFunction::new(
            "Const",
            Domain::cube(-1.0, 1.0, dim).unwrap(),
            Sense::Minimize,
            |_| 3.0,
        )
    }

    #[test]
    fn one_iteration_budget() {
        let f = make_benchmark("Rosenbrock", 2).unwrap();
        let cfg = MtrboConfig {
            budget: 11,
            ..MtrboConfig::default()
        };
        let t = run_mtrbo(&f, f.domain(), &cfg).unwrap();
        assert_eq!(t.evaluations, 11);
        assert_eq!(t.records.len(), 11);
        assert_eq!(t.iterations(), 1);
    }

    #[test]
    fn constant_objective_is_flat() {
        let f = constant(2);
        let cfg = MtrboConfig {
            budget: 16,
            ..MtrboConfig::default()
        };
        for t in [
            run_mtrbo(&f, f.domain(), &cfg).unwrap(),
            run_ego(&f, f.domain(), &cfg).unwrap(),
        ] {
            assert_eq!(t.f_opt, 3.0);
            assert!(t.best_so_far().iter().all(|v| *v == 3.0));
            assert_eq!(t.evaluations, 16);
        }
    }

    #[test]
    fn ego_shares_initial_design() {
        let f = make_benchmark("Ackley", 2).unwrap();
        let cfg = MtrboConfig {
            budget: 12,
            seed: 5,
            ..MtrboConfig::default()
        };
        let a = run_mtrbo(&f, f.domain(), &cfg).unwrap();
        let b = run_ego(&f, f.domain(), &cfg).unwrap();
        for i in 0..cfg.n0 {
            assert_eq!(a.records[i].query, b.records[i].query);
        }
    }

    #[test]
    fn ego_finds_bowl_minimum() {
        let dom = Domain::cube(-2.0, 3.0, 1).unwrap();
        let f =
            ObjectiveFunction::new("Bowl", dom, Sense::Minimize, |x| (x[0] - 0.7).powi(2) + 1.0);
        let cfg = MtrboConfig {
            budget: 20,
            n0: 4,
            ..MtrboConfig::default()
        };
        let t = run_ego(&f, f.domain(), &cfg).unwrap();
        assert!((t.f_opt - 1.0).abs() < 1e-2, "f_opt = {}", t.f_opt);
    }

    #[test]
    fn full_mode_matches_run_mtrbo() {
        let f = make_benchmark("Griewank", 2).unwrap();
        let cfg = MtrboConfig {
            budget: 15,
            seed: 3,
            mode: Mode::Full,
            ..MtrboConfig::default()
        };
        assert_eq!(
            run_ablation(&f, f.domain(), &cfg).unwrap(),
            run_mtrbo(&f, f.domain(), &cfg).unwrap()
        );
    }

    #[test]
    fn explore_only_tags() {
        let f = make_benchmark("Ackley", 2).unwrap();
        let cfg = MtrboConfig {
            budget: 15,
            mode: Mode::ExploreOnly,
            ..MtrboConfig::default()
        };
        let t = run_ablation(&f, f.domain(), &cfg).unwrap();
        assert!(t.records[cfg.n0..]
            .iter()
            .all(|r| r.stage == Stage::Explored));
        let cfg = MtrboConfig {
            mode: Mode::ExploitOnly,
            ..cfg
        };
        let t = run_ablation(&f, f.domain(), &cfg).unwrap();
        assert!(t.records[cfg.n0..]
            .iter()
            .all(|r| r.stage == Stage::Exploited));
    }

    #[test]
    fn non_finite_objective_aborts() {
        let dom = Domain::cube(0.0, 1.0, 2).unwrap();
        let f = ObjectiveFunction::new("Bad", dom, Sense::Minimize, |x| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                x[1]
            }
        });
        let cfg = MtrboConfig {
            budget: 12,
            ..MtrboConfig::default()
        };
        assert!(matches!(
            run_mtrbo(&f, f.domain(), &cfg),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn invalid_configs() {
        let f = make_benchmark("Ackley", 2).unwrap();
        for cfg in [
            MtrboConfig {
                n0: 1,
                ..MtrboConfig::default()
            },
            MtrboConfig {
                budget: 10,
                ..MtrboConfig::default()
            },
            MtrboConfig {
                length_scale: Some(0.0),
                ..MtrboConfig::default()
            },
        ] {
            assert!(matches!(
                run_mtrbo(&f, f.domain(), &cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn duplicates_are_perturbed() {
        let dom = Domain::cube(0.0, 1.0, 2).unwrap();
        let data = ObservationSet::from_points(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let mut rng = stream(1, PERTURB_STREAM);
        let (x, moved) = deduplicate(vec![0.0, 0.0], &data, &dom, &mut rng);
        assert!(moved);
        assert!(dom.contains(&x));
        assert!(crate::distance(&x, &[0.0, 0.0]) > DUPLICATE_RADIUS);
        let (y, moved) = deduplicate(vec![0.5, 0.5], &data, &dom, &mut rng);
        assert!(!moved);
        assert_eq!(y, vec![0.5, 0.5]);
    }
}
