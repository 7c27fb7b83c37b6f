use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::inputs::ExperimentInputs;
use super::protocol::SplitResult;
use crate::error::{QppError, Result};
use crate::metrics::paired_t_test;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the configuration dump with the output directory blanked.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_pearson: f64,
    pub mean_kendall: f64,
}

/// Paired two-tailed t-test between two methods over per-split values.
/// `t` and `p` are absent when the differences are constant and non-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub label_kind: String,
    pub target_kind: String,
    pub n_queries: usize,
    pub methods: Vec<MethodSummary>,
    pub significance: Vec<PairedComparison>,
    pub splits: Vec<SplitResult>,
}

/// Full-scale reference values for context; they need the original
/// collections and large encoders and are not expected at desk scale.
pub const FULL_SCALE_REFERENCE: [(&str, &str, Option<f64>, Option<f64>); 4] = [
    ("(R+Q+D)-large", "Robust04", None, Some(0.470)),
    ("(R+Q+D)-large", "GOV2", Some(0.688), Some(0.508)),
    ("(R+Q+D)-large", "ClueWeb09-B", Some(0.545), Some(0.399)),
    ("n(σ_X%)", "Robust04", Some(0.589), None),
];

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let blank = ExperimentConfig {
        out: Default::default(),
        ..cfg.clone()
    };
    hex::encode(Sha256::digest(blank.to_toml().as_bytes()))
}

pub fn build_report(cfg: &ExperimentConfig, inputs: &ExperimentInputs, splits: Vec<SplitResult>) -> Result<ExperimentReport> {
    let method_names = cfg.methods.clone();
    let (methods, significance) = summarize(&method_names, &splits)?;
    Ok(ExperimentReport {
        provenance: Provenance {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        label_kind: inputs.label_kind.clone(),
        target_kind: inputs.target_kind.clone(),
        n_queries: inputs.qids().len(),
        methods,
        significance,
        splits,
    })
}

fn per_split(splits: &[SplitResult], method: &str, metric: &str) -> Result<Vec<f64>> {
    splits
        .iter()
        .map(|s| {
            let m = s.methods.get(method).ok_or_else(|| {
                QppError::MissingData(format!("split {} has no result for {method}", s.index))
            })?;
            Ok(if metric == "pearson" { m.pearson } else { m.kendall })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn summarize(names: &[String], splits: &[SplitResult]) -> Result<(Vec<MethodSummary>, Vec<PairedComparison>)> {
    if splits.is_empty() {
        return Err(QppError::MissingData("no split results".into()));
    }
    let methods = names
        .iter()
        .map(|m| {
            Ok(MethodSummary {
                method: m.clone(),
                mean_pearson: mean(&per_split(splits, m, "pearson")?),
                mean_kendall: mean(&per_split(splits, m, "kendall")?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tests = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            for metric in ["pearson", "kendall"] {
                let x = per_split(splits, a, metric)?;
                let y = per_split(splits, b, metric)?;
                let r = if x.len() >= 2 { paired_t_test(&x, &y).ok() } else { None };
                tests.push(PairedComparison {
                    a: a.clone(),
                    b: b.clone(),
                    metric: metric.to_string(),
                    t: r.map(|r| r.t),
                    p: r.map(|r| r.p),
                });
            }
        }
    }
    Ok((methods, tests))
}

impl ExperimentReport {
    /// Recompute means and tests from the stored per-split values.
    pub fn regenerate(&self) -> Result<ExperimentReport> {
        let names: Vec<String> = self.methods.iter().map(|m| m.method.clone()).collect();
        let (methods, significance) = summarize(&names, &self.splits)?;
        Ok(ExperimentReport {
            methods,
            significance,
            ..self.clone()
        })
    }

    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        serde_json::from_str(raw).map_err(|e| QppError::Format(format!("report: {e}")))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} splits, {} queries, target {}, supervision {}",
            self.splits.len(),
            self.n_queries,
            self.target_kind,
            self.label_kind
        );
        let _ = writeln!(
            out,
            "config {} seed {} version {}\n",
            &self.provenance.config_hash[..12],
            self.provenance.seed,
            self.provenance.version
        );
        let _ = writeln!(out, "{:<16} {:>9} {:>9}", "method", "pearson", "kendall");
        for m in &self.methods {
            let _ = writeln!(out, "{:<16} {:>9.4} {:>9.4}", m.method, m.mean_pearson, m.mean_kendall);
        }
        if !self.significance.is_empty() {
            let _ = writeln!(out, "\npaired two-tailed t-tests over splits");
            let _ = writeln!(out, "{:<16} {:<16} {:<8} {:>9} {:>9}", "a", "b", "metric", "t", "p");
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            for c in &self.significance {
                let _ = writeln!(
                    out,
                    "{:<16} {:<16} {:<8} {:>9} {:>9}",
                    c.a,
                    c.b,
                    c.metric,
                    fmt(c.t),
                    fmt(c.p)
                );
            }
        }
        let _ = writeln!(out, "\nfull-scale reference values (original collections, large encoders)");
        for (method, coll, rho, tau) in FULL_SCALE_REFERENCE {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(out, "{method:<16} {coll:<12} ρ {:>5} τ {:>5}", fmt(rho), fmt(tau));
        }
        out
    }
}
