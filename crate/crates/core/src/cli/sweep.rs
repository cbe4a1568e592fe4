//! Parameter sweeps: one run and report per grid point, plus a summary table
//! built from the same report objects.

use std::path::Path;

use rayon::prelude::*;
use toml::Value;

use super::config::ConfigDocument;
use super::csv_out::{format_float, write_csv};
use crate::error::{Error, Result};
use crate::simulator::run_scenario;
use crate::verification::{verify, VerificationReport};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "DUAL_ADAPT_THREADS";

#[derive(Debug)]
pub enum PointOutcome {
    Report(Box<VerificationReport>),
    /// Config error or divergence, with its exit code.
    Failed {
        code: i32,
        message: String,
    },
}

#[derive(Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub params: Vec<(String, Value)>,
    pub outcome: PointOutcome,
}

impl SweepPoint {
    pub fn stem(&self) -> String {
        format!("point_{:03}", self.index)
    }

    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            PointOutcome::Report(r) if r.pass => super::EXIT_OK,
            PointOutcome::Report(_) => super::EXIT_CHECK_FAILED,
            PointOutcome::Failed { code, .. } => *code,
        }
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
}

fn run_point(
    doc: &ConfigDocument,
    index: usize,
    params: Vec<(String, Value)>,
    out_dir: &Path,
) -> SweepPoint {
    let mut point = SweepPoint {
        index,
        params,
        outcome: PointOutcome::Failed {
            code: super::EXIT_CONFIG,
            message: String::new(),
        },
    };
    let result = (|| -> Result<VerificationReport> {
        let mut doc = doc.clone();
        for (key, value) in &point.params {
            doc.set(key, value.clone())?;
        }
        let cfg = doc.build()?;
        let log = run_scenario(&cfg)?;
        let report = verify(&cfg, &log)?;
        let stem = point.stem();
        write_csv(&log, &out_dir.join(format!("{stem}.csv")))?;
        let json_path = out_dir.join(format!("{stem}.json"));
        std::fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
        Ok(report)
    })();
    point.outcome = match result {
        Ok(report) => PointOutcome::Report(Box::new(report)),
        Err(e) => PointOutcome::Failed {
            code: super::exit_code_for(&e),
            message: e.to_string(),
        },
    };
    point
}

/// Runs every grid point (concurrently, order-preserving) and writes
/// `point_NNN.csv`, `point_NNN.json` and `summary.csv` into `out_dir`.
pub fn run_sweep(doc: &ConfigDocument, out_dir: &Path) -> Result<Vec<SweepPoint>> {
    let grid = doc.sweep_grid()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(THREADS_ENV, format!("cannot build thread pool: {e}")))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        grid.into_par_iter()
            .enumerate()
            .map(|(i, params)| run_point(doc, i, params, out_dir))
            .collect()
    });
    write_summary(&points, &out_dir.join("summary.csv"))?;
    Ok(points)
}

/// Check names in first-seen order across all reports.
fn check_names(points: &[SweepPoint]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for p in points {
        if let PointOutcome::Report(r) = &p.outcome {
            for c in &r.checks {
                if !names.contains(&c.name) {
                    names.push(c.name.clone());
                }
            }
        }
    }
    names
}

pub fn write_summary(points: &[SweepPoint], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let keys: Vec<String> = points
        .first()
        .map(|p| p.params.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let names = check_names(points);
    let mut header = vec!["point".to_string()];
    header.extend(keys.iter().cloned());
    header.extend(["status".to_string(), "pass".to_string()]);
    for n in &names {
        header.push(format!("{n}.measured"));
        header.push(format!("{n}.pass"));
    }
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.stem()];
        row.extend(p.params.iter().map(|(_, v)| v.to_string()));
        match &p.outcome {
            PointOutcome::Report(r) => {
                row.push("ok".to_string());
                row.push(r.pass.to_string());
                for n in &names {
                    match r.check(n) {
                        Some(c) => {
                            row.push(format_float(c.measured));
                            row.push(c.pass.to_string());
                        }
                        None => row.extend([String::new(), String::new()]),
                    }
                }
            }
            PointOutcome::Failed { code, message } => {
                let status = if *code == super::EXIT_DIVERGED {
                    "diverged"
                } else {
                    "error"
                };
                row.push(format!("{status}: {message}"));
                row.push("false".to_string());
                row.extend(std::iter::repeat_n(String::new(), 2 * names.len()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
