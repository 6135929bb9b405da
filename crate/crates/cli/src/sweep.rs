//! Ensembles of runs executed in parallel.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SweepConfig};
use crate::pipeline::{self, Status, Summary, AUDIT_NAMES, CSV_VERSION};

/// One run of an ensemble; `summary` is `None` when the config was rejected
/// or the outputs could not be written.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub error: Option<String>,
    pub summary: Option<Summary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: String,
    pub csv_version: u32,
    pub runs: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// Fraction of runs passing each audit; runs lacking it count as failures.
    pub audit_pass_rates: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl SweepSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.runs
    }
}

/// `KFP_WORKERS` wins over the config, which wins over the core count.
pub fn worker_count(configured: Option<usize>) -> usize {
    std::env::var("KFP_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .or(configured)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn run_one(cfg: &RunConfig) -> RunRecord {
    let name = cfg.name.clone().unwrap_or_default();
    match pipeline::run_config(cfg) {
        Ok(out) => RunRecord {
            name,
            seed: cfg.seed,
            passed: out.summary.passed(),
            error: out.summary.error.clone(),
            summary: Some(out.summary),
        },
        Err(e) => RunRecord { name, seed: cfg.seed, passed: false, error: Some(format!("{e:#}")), summary: None },
    }
}

pub fn run_all(configs: &[RunConfig], workers: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| configs.par_iter().map(run_one).collect()))
}

pub fn summarize(records: &[RunRecord]) -> SweepSummary {
    let runs = records.len();
    let passed = records.iter().filter(|r| r.passed).count();
    let rate = |n: usize| if runs == 0 { 0.0 } else { n as f64 / runs as f64 };
    let audit_pass_rates = AUDIT_NAMES
        .iter()
        .map(|&a| {
            let n = records
                .iter()
                .filter(|r| r.summary.as_ref().and_then(|s| s.audit(a)).is_some_and(|x| x.pass))
                .count();
            (a.to_string(), rate(n))
        })
        .collect();
    SweepSummary {
        kind: "sweep".into(),
        csv_version: CSV_VERSION,
        runs,
        passed,
        pass_rate: rate(passed),
        audit_pass_rates,
        failures: records.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn write_table(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["name", "seed", "status", "passed"];
    header.extend(AUDIT_NAMES);
    header.extend(["mu_emp", "sigma_emp", "log10_kappa", "log10_kappa_emp", "error"]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.name.clone(), r.seed.to_string()];
        match &r.summary {
            Some(s) => {
                row.push(if s.status == Status::Complete { "complete" } else { "incomplete" }.into());
                row.push(u8::from(r.passed).to_string());
                for a in AUDIT_NAMES {
                    row.push(s.audit(a).map(|x| u8::from(x.pass).to_string()).unwrap_or_default());
                }
                let metric = |k: &str| opt(s.metrics.get(k).copied().flatten());
                let constant = |k: &str| opt(s.constants.get(k).copied().flatten());
                row.extend([metric("mu_emp"), metric("sigma_emp"), constant("log10_kappa"), metric("log10_kappa_emp")]);
            }
            None => {
                row.extend(["rejected".to_string(), "0".into()]);
                row.extend(std::iter::repeat(String::new()).take(AUDIT_NAMES.len() + 4));
            }
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Expands, runs and writes `sweep.csv` and `summary.json` under the sweep output.
pub fn run_sweep(sweep: &SweepConfig) -> Result<(Vec<RunRecord>, SweepSummary)> {
    let configs = sweep.expand()?;
    fs::create_dir_all(&sweep.output).with_context(|| format!("creating {}", sweep.output.display()))?;
    let records = run_all(&configs, worker_count(sweep.workers))?;
    let summary = summarize(&records);
    write_table(&records, &sweep.output.join("sweep.csv"))?;
    fs::write(sweep.output.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok((records, summary))
}
