//! Reads the `summary.json` of a run or sweep directory and renders it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

use crate::pipeline::Summary;
use crate::sweep::SweepSummary;

pub enum Report {
    Run(Box<Summary>),
    Sweep(SweepSummary),
}

impl Report {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.json");
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        match value.get("kind").and_then(Value::as_str) {
            Some("run") => Ok(Self::Run(Box::new(serde_json::from_value(value)?))),
            Some("sweep") => Ok(Self::Sweep(serde_json::from_value(value)?)),
            other => bail!("{}: unknown summary kind {other:?}", path.display()),
        }
    }

    pub fn passed(&self) -> bool {
        match self {
            Self::Run(s) => s.passed(),
            Self::Sweep(s) => s.all_passed(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        match self {
            Self::Run(s) => {
                let _ = writeln!(out, "run {} (seed {}): {:?}", s.name, s.seed, s.status);
                if let Some(e) = &s.error {
                    let _ = writeln!(out, "error: {e}");
                }
                let _ = writeln!(out, "{:<20} {:<10} {:>14} {:>14}  result", "audit", "stage", "value", "tolerance");
                for a in &s.audits {
                    let show = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
                    let _ = writeln!(
                        out,
                        "{:<20} {:<10} {:>14} {:>14}  {}",
                        a.name,
                        format!("{:?}", a.stage).to_lowercase(),
                        show(a.value),
                        show(a.tolerance),
                        if a.pass { "PASS" } else { "FAIL" }
                    );
                }
            }
            Self::Sweep(s) => {
                let _ = writeln!(out, "sweep: {}/{} runs passed ({:.1}%)", s.passed, s.runs, 100.0 * s.pass_rate);
                for (name, rate) in &s.audit_pass_rates {
                    let _ = writeln!(out, "{name:<20} {:>6.1}%", 100.0 * rate);
                }
                for f in &s.failures {
                    let _ = writeln!(out, "failed: {f}");
                }
            }
        }
        out
    }
}
