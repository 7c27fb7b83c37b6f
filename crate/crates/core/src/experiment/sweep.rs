use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::inputs::ExperimentInputs;
use super::protocol::run_experiment;
use super::report::{ExperimentReport, MethodSummary};
use crate::error::{QppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GroupSize,
    InferDepth,
}

impl SweepAxis {
    pub fn default_values(self) -> &'static [usize] {
        match self {
            SweepAxis::GroupSize => &[1, 8, 16, 32, 64],
            SweepAxis::InferDepth => &[10, 25, 50, 100, 200],
        }
    }

    pub fn apply(self, cfg: &ExperimentConfig, value: usize) -> ExperimentConfig {
        let mut c = cfg.clone();
        match self {
            SweepAxis::GroupSize => c.group_size = value,
            SweepAxis::InferDepth => c.infer_depth = value,
        }
        c
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::GroupSize => "group_size",
            SweepAxis::InferDepth => "infer_depth",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = QppError;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "group_size" => Ok(SweepAxis::GroupSize),
            "infer_depth" => Ok(SweepAxis::InferDepth),
            _ => Err(QppError::Input(format!(
                "unknown sweep axis '{s}' (group_size or infer_depth)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<ExperimentReport>,
}

/// One protocol run per grid value, varying only `axis`.
pub fn sweep(cfg: &ExperimentConfig, inputs: &ExperimentInputs, axis: SweepAxis, values: &[usize]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(QppError::Input("empty sweep grid".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &v in values {
        let report = run_experiment(&axis.apply(cfg, v), inputs)?;
        rows.push(SweepRow {
            value: v,
            methods: report.methods.clone(),
        });
        reports.push(report);
    }
    Ok(SweepReport { axis, rows, reports })
}

impl SweepReport {
    /// One row per grid value with mean τ and ρ of every method.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<12}", self.axis.to_string());
        for m in &self.rows[0].methods {
            let _ = write!(out, " {:>16} {:>16}", format!("{}:tau", m.method), format!("{}:rho", m.method));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<12}", r.value);
            for m in &r.methods {
                let _ = write!(out, " {:>16.4} {:>16.4}", m.mean_kendall, m.mean_pearson);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }
}
