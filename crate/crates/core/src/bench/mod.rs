//! Multi-trial benchmark harness: seeded trials, normalized scores,
//! significance marks and report emission.

mod config;
mod report;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::objectives::{ObjectiveFunction, Sense};
use crate::optimizer::{run_ablation, Mode, MtrboConfig, RunTrace};

pub use config::ConfigFile;
pub use report::{trace_file_name, write_report, write_table, write_traces};
pub use stats::{
    doubled_midranks, normalize, wilcoxon_rank_sum, Mark, Normalizer, RankSumTest, EXACT_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mtrbo,
    Ego,
    ExploreOnly,
    ExploitOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Mtrbo,
        Method::Ego,
        Method::ExploreOnly,
        Method::ExploitOnly,
    ];

    pub fn mode(self) -> Mode {
        match self {
            Method::Mtrbo => Mode::Full,
            Method::Ego => Mode::Ego,
            Method::ExploreOnly => Mode::ExploreOnly,
            Method::ExploitOnly => Mode::ExploitOnly,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mtrbo => "mtrbo",
            Method::Ego => "ego",
            Method::ExploreOnly => "explore_only",
            Method::ExploitOnly => "exploit_only",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == lower || (lower == "full" && *m == Method::Mtrbo))
            .ok_or_else(|| {
                crate::Error::InvalidConfig(format!(
                    "unknown method `{s}` (expected mtrbo, ego, explore_only or exploit_only)"
                ))
            })
    }
}

/// What to run: every method on every function, `trials` times each.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub functions: Vec<ObjectiveFunction>,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Shared settings; `seed` and `mode` are overridden per trial.
    pub config: MtrboConfig,
    pub master_seed: u64,
}

/// Label of a function cell, e.g. `Ackley-2d`.
pub fn function_label(f: &ObjectiveFunction) -> String {
    format!("{}-{}d", f.name(), f.dimension())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial: a pure function of the master seed, the function cell,
/// the method and the trial index.
pub fn trial_seed(master_seed: u64, function: &str, method: Method, trial: usize) -> u64 {
    let mut h = splitmix(master_seed);
    for b in function
        .bytes()
        .chain([0xff])
        .chain(method.as_str().bytes())
    {
        h = splitmix(h ^ u64::from(b));
    }
    splitmix(h ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRun {
    pub function: String,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub trace: Option<RunTrace>,
    pub error: Option<String>,
}

/// Aggregates of one (function, method) cell. Raw values are in the
/// objective's sense; scores are normalized losses (0 is the best observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub function: String,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub incomplete: bool,
    pub best: Option<f64>,
    pub mean: Option<f64>,
    pub worst: Option<f64>,
    pub best_score: Option<f64>,
    pub mean_score: Option<f64>,
    pub worst_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub function: String,
    pub reference: Method,
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub mark: Mark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub label: String,
    pub name: String,
    pub dimension: usize,
    pub sense: Sense,
    pub normalizer: Option<Normalizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub master_seed: u64,
    pub trials: usize,
    pub config: MtrboConfig,
    pub methods: Vec<Method>,
    pub functions: Vec<FunctionInfo>,
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
    pub runs: Vec<TrialRun>,
}

impl BenchReport {
    pub fn cell(&self, function: &str, method: Method) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.function == function && c.method == method)
    }

    pub fn comparison(&self, function: &str, method: Method) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.function == function && c.method == method)
    }

    /// Final values of the completed trials of one cell, in trial order.
    pub fn finals(&self, function: &str, method: Method) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.function == function && r.method == method)
            .filter_map(|r| r.trace.as_ref().map(|t| t.f_opt))
            .collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs every trial (in parallel) and aggregates the results. The report does
/// not depend on scheduling order.
pub fn run_bench(spec: &BenchSpec) -> crate::Result<BenchReport> {
    if spec.trials == 0 {
        return Err(crate::Error::InvalidConfig(
            "trials must be at least 1".into(),
        ));
    }
    if spec.methods.is_empty() || spec.functions.is_empty() {
        return Err(crate::Error::InvalidConfig(
            "need at least one function and one method".into(),
        ));
    }
    spec.config.validate()?;

    let mut methods: Vec<Method> = Vec::new();
    for m in &spec.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let jobs: Vec<(usize, Method, usize)> = (0..spec.functions.len())
        .flat_map(|fi| {
            let methods = &methods;
            methods
                .iter()
                .flat_map(move |&m| (0..spec.trials).map(move |t| (fi, m, t)))
        })
        .collect();

    let runs: Vec<TrialRun> = jobs
        .par_iter()
        .map(|&(fi, method, trial)| {
            let f = &spec.functions[fi];
            let label = function_label(f);
            let seed = trial_seed(spec.master_seed, &label, method, trial);
            let cfg = MtrboConfig {
                seed,
                mode: method.mode(),
                ..spec.config
            };
            let (trace, error) = match run_ablation(f, f.domain(), &cfg) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrialRun {
                function: label,
                method,
                trial,
                seed,
                trace,
                error,
            }
        })
        .collect();

    let mut functions = Vec::new();
    let mut cells = Vec::new();
    let mut comparisons = Vec::new();
    for f in &spec.functions {
        let label = function_label(f);
        let sense = f.sense();
        let loss = |v: f64| -sense.to_internal(v);
        let finals_of = |m: Method| -> Vec<f64> {
            runs.iter()
                .filter(|r| r.function == label && r.method == m)
                .filter_map(|r| r.trace.as_ref().map(|t| t.f_opt))
                .collect()
        };
        let pool: Vec<f64> = methods
            .iter()
            .flat_map(|&m| finals_of(m))
            .map(loss)
            .collect();
        let normalizer = (!pool.is_empty()).then(|| Normalizer::from_pool(&pool));

        for &m in &methods {
            let finals = finals_of(m);
            let failed = spec.trials - finals.len();
            let losses: Vec<f64> = finals.iter().map(|v| loss(*v)).collect();
            let summary = if losses.is_empty() {
                CellSummary {
                    function: label.clone(),
                    method: m,
                    completed: 0,
                    failed,
                    incomplete: true,
                    best: None,
                    mean: None,
                    worst: None,
                    best_score: None,
                    mean_score: None,
                    worst_score: None,
                }
            } else {
                let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let norm = normalizer.expect("pool holds this cell's values");
                let scores: Vec<f64> = losses.iter().map(|l| norm.score(*l)).collect();
                CellSummary {
                    function: label.clone(),
                    method: m,
                    completed: finals.len(),
                    failed,
                    incomplete: failed > 0,
                    best: Some(-sense.from_internal(lo)),
                    mean: Some(mean(&finals)),
                    worst: Some(-sense.from_internal(hi)),
                    best_score: Some(norm.score(lo)),
                    mean_score: Some(mean(&scores)),
                    worst_score: Some(norm.score(hi)),
                }
            };
            cells.push(summary);
        }

        let reference = if methods.contains(&Method::Mtrbo) {
            Method::Mtrbo
        } else {
            methods[0]
        };
        let ref_losses: Vec<f64> = finals_of(reference).into_iter().map(loss).collect();
        for &m in methods.iter().filter(|&&m| m != reference) {
            let losses: Vec<f64> = finals_of(m).into_iter().map(loss).collect();
            if losses.is_empty() || ref_losses.is_empty() {
                continue;
            }
            let test = wilcoxon_rank_sum(&losses, &ref_losses);
            comparisons.push(Comparison {
                function: label.clone(),
                reference,
                method: m,
                statistic: test.statistic,
                p_value: test.p_value,
                mark: Mark::from_test(test.p_value, mean(&losses), mean(&ref_losses)),
            });
        }

        functions.push(FunctionInfo {
            label,
            name: f.name().to_string(),
            dimension: f.dimension(),
            sense,
            normalizer,
        });
    }

    Ok(BenchReport {
        master_seed: spec.master_seed,
        trials: spec.trials,
        config: spec.config,
        methods,
        functions,
        cells,
        comparisons,
        runs,
    })
}
