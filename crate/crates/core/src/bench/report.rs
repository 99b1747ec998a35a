//! Report files: `report.json`, `table.csv` and per-trial trace CSVs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{BenchReport, CellSummary, Method, TrialRun};
use crate::Result;

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Pretty-printed JSON of the whole report.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    let mut out = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(path)
}

/// One row per function and metric, one column per method, closing with the
/// significance marks against the reference method.
pub fn write_table(report: &BenchReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("table.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["function".to_string(), "dimension".into(), "metric".into()];
    header.extend(report.methods.iter().map(|m| m.as_str().to_string()));
    w.write_record(&header)?;

    type Metric = fn(&CellSummary) -> Option<f64>;
    let metrics: [(&str, Metric); 6] = [
        ("Best", |c| c.best),
        ("Mean", |c| c.mean),
        ("Worst", |c| c.worst),
        ("Best score", |c| c.best_score),
        ("Mean score", |c| c.mean_score),
        ("Worst score", |c| c.worst_score),
    ];
    for info in &report.functions {
        let prefix = [info.name.clone(), info.dimension.to_string()];
        for (name, get) in metrics {
            let mut row = prefix.to_vec();
            row.push(name.to_string());
            row.extend(
                report
                    .methods
                    .iter()
                    .map(|&m| fmt(report.cell(&info.label, m).and_then(get))),
            );
            w.write_record(&row)?;
        }
        let mut row = prefix.to_vec();
        row.push("Mark".to_string());
        row.extend(report.methods.iter().map(|&m| {
            report
                .comparison(&info.label, m)
                .map(|c| c.mark.symbol().to_string())
                .unwrap_or_default()
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn trace_file_name(function: &str, method: Method, trial: usize) -> String {
    format!("trace_{function}_{}_{trial}.csv", method.as_str())
}

fn write_trace(run: &TrialRun, dir: &Path) -> Result<Option<PathBuf>> {
    let Some(trace) = &run.trace else {
        return Ok(None);
    };
    let path = dir.join(trace_file_name(&run.function, run.method, run.trial));
    let mut w = csv_writer(&path)?;
    w.write_record([
        "iter",
        "stage",
        "best_so_far",
        "query_value",
        "explore_radius",
    ])?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            r.stage.as_str().to_string(),
            r.best_so_far.to_string(),
            r.value.to_string(),
            fmt(r.explore_radius),
        ])?;
    }
    w.flush()?;
    Ok(Some(path))
}

/// Convergence and exploration-radius trace of every completed trial.
pub fn write_traces(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for run in &report.runs {
        if let Some(p) = write_trace(run, dir)? {
            paths.push(p);
        }
    }
    Ok(paths)
}
