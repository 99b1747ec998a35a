use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mtrbo::acquisition::AcquisitionKind;
use mtrbo::bench::{
    run_bench, write_report, write_table, write_traces, BenchReport, BenchSpec, ConfigFile, Method,
};
use mtrbo::objectives::{
    load_returns, make_benchmark, portfolio_metrics, ObjectiveFunction, PortfolioProblem,
};
use mtrbo::optimizer::MtrboConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Seeded multi-trial Bayesian optimization benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare methods on a benchmark function.
    Run {
        #[arg(long)]
        function: String,
        #[arg(long)]
        dim: usize,
        /// Comma-separated subset of mtrbo, ego, explore_only, exploit_only.
        #[arg(long, value_delimiter = ',', default_value = "mtrbo,ego")]
        method: Vec<Method>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize mean-variance portfolio weights estimated from a price file.
    Portfolio {
        /// CSV with a `date` column followed by one adjusted-close column per ticker.
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_value = "mtrbo,ego")]
        method: Vec<Method>,
        #[command(flatten)]
        common: Common,
    },
    /// Full method against its exploration-only and exploitation-only variants.
    Ablation {
        #[arg(long)]
        function: String,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Master seed; per-trial seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file whose keys mirror the configuration field names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    subiters: Option<usize>,
    #[arg(long)]
    acquisition: Option<AcquisitionKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    length_scale: Option<f64>,
}

impl Common {
    /// File values first, then command-line flags.
    fn resolve(&self) -> Result<(MtrboConfig, usize)> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ConfigFile::default(),
        };
        let mut cfg = MtrboConfig::default();
        file.apply(&mut cfg);
        let flags = ConfigFile {
            budget: self.budget,
            n0: self.n0,
            r0: self.r0,
            subiters: self.subiters,
            acquisition: self.acquisition,
            beta: self.beta,
            length_scale: self.length_scale,
            ..ConfigFile::default()
        };
        flags.apply(&mut cfg);
        let trials = self.trials.or(file.trials).unwrap_or(10);
        cfg.validate()?;
        Ok((cfg, trials))
    }
}

fn run_spec(
    functions: Vec<ObjectiveFunction>,
    methods: Vec<Method>,
    common: &Common,
) -> Result<BenchReport> {
    let (config, trials) = common.resolve()?;
    let spec = BenchSpec {
        functions,
        methods,
        trials,
        config,
        master_seed: common.seed,
    };
    let report = run_bench(&spec)?;
    emit(&report, &common.out)?;
    Ok(report)
}

fn emit(report: &BenchReport, out: &Path) -> Result<()> {
    write_report(report, out)?;
    write_table(report, out)?;
    write_traces(report, out)?;
    for cell in &report.cells {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        println!(
            "{:<16} {:<13} best {:>14} mean {:>14} worst {:>14} (score {:>6}){}",
            cell.function,
            cell.method.as_str(),
            show(cell.best),
            show(cell.mean),
            show(cell.worst),
            cell.mean_score.map_or("n/a".into(), |s| format!("{s:.2}")),
            if cell.incomplete { " incomplete" } else { "" },
        );
    }
    for c in &report.comparisons {
        println!(
            "{:<16} {} vs {}: p = {:.4} {}",
            c.function,
            c.method.as_str(),
            c.reference.as_str(),
            c.p_value,
            c.mark.symbol()
        );
    }
    for run in report.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "trial {} of {} ({}) failed: {}",
            run.trial,
            run.function,
            run.method.as_str(),
            run.error.as_deref().unwrap_or_default()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct PortfolioRow {
    method: Method,
    trial: usize,
    weights: Vec<f64>,
    expected_return: f64,
    risk: f64,
    objective: f64,
    sharpe: Option<f64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            function,
            dim,
            method,
            common,
        } => {
            let f = make_benchmark(&function, dim)?;
            run_spec(vec![f], method, &common)?;
        }
        Command::Ablation {
            function,
            dim,
            common,
        } => {
            let f = make_benchmark(&function, dim)?;
            let methods = vec![Method::Mtrbo, Method::ExploreOnly, Method::ExploitOnly];
            run_spec(vec![f], methods, &common)?;
        }
        Command::Portfolio {
            prices,
            lambda,
            method,
            common,
        } => {
            let loaded =
                load_returns(&prices).with_context(|| format!("loading {}", prices.display()))?;
            if loaded.dropped_rows > 0 {
                eprintln!("dropped {} rows with missing prices", loaded.dropped_rows);
            }
            if loaded.tickers.len() < 2 {
                bail!("the portfolio needs at least two tickers");
            }
            let problem = PortfolioProblem::from_returns(&loaded, lambda)?;
            let f = problem.objective_function("Portfolio")?;
            let report = run_spec(vec![f], method, &common)?;
            let rows = report
                .runs
                .iter()
                .filter_map(|r| {
                    let t = r.trace.as_ref()?;
                    let m = portfolio_metrics(&problem, &t.x_opt).ok()?;
                    Some(PortfolioRow {
                        method: r.method,
                        trial: r.trial,
                        weights: m.weights,
                        expected_return: m.expected_return,
                        risk: m.risk,
                        objective: m.objective,
                        sharpe: m.sharpe,
                    })
                })
                .collect::<Vec<_>>();
            let path = common.out.join("portfolio.json");
            std::fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")?;
        }
    }
    Ok(())
}
