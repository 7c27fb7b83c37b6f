use std::collections::BTreeMap;

use log::warn;

use crate::data::{Qrels, RetrievalRun};
use crate::error::{QppError, Result};
use crate::metrics::{LabelKind, QueryLabel};

/// Per-query effectiveness labels. Queries missing from `qrels`, or with no
/// relevant document, are left out with a warning.
pub fn compute_labels(run: &RetrievalRun, qrels: &Qrels, kind: LabelKind) -> Result<BTreeMap<String, QueryLabel>> {
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for (qid, list) in run.iter() {
        let ranked: Vec<&str> = list.iter().map(|e| e.docid.as_str()).collect();
        match kind.evaluate(qid, &ranked, qrels) {
            Some(value) => {
                out.insert(
                    qid.to_string(),
                    QueryLabel {
                        qid: qid.to_string(),
                        value,
                        kind,
                    },
                );
            }
            None => missing.push(qid),
        }
    }
    if !missing.is_empty() {
        warn!(
            "{} queries have no relevant judgments and are excluded: {}",
            missing.len(),
            missing.join(" ")
        );
    }
    if out.is_empty() {
        return Err(QppError::Input("no run query has relevance judgments".into()));
    }
    Ok(out)
}

pub fn label_values(labels: &BTreeMap<String, QueryLabel>) -> BTreeMap<String, f64> {
    labels.iter().map(|(q, l)| (q.clone(), l.value)).collect()
}

/// A label file: `qid value kind` per line, every line with the same kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    pub kind: String,
    pub values: BTreeMap<String, f64>,
}

pub fn parse_label_file(raw: &str) -> Result<LabelFile> {
    let mut kind: Option<String> = None;
    let mut values = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, value, k] = cols[..] else {
            return Err(QppError::parse(i + 1, "expected 'qid value kind'"));
        };
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| QppError::parse(i + 1, format!("bad value '{value}'")))?;
        match &kind {
            None => kind = Some(k.to_string()),
            Some(prev) if prev != k => {
                return Err(QppError::parse(i + 1, format!("mixed label kinds '{prev}' and '{k}'")))
            }
            _ => {}
        }
        if values.insert(qid.to_string(), value).is_some() {
            return Err(QppError::parse(i + 1, format!("duplicate qid {qid}")));
        }
    }
    let kind = kind.ok_or_else(|| QppError::MissingData("empty label file".into()))?;
    Ok(LabelFile { kind, values })
}

pub fn serialize_labels(values: &BTreeMap<String, f64>, kind: &str) -> String {
    values.iter().map(|(q, v)| format!("{q} {v} {kind}\n")).collect()
}

/// Parse `qid score method` prediction lines (the method column is optional).
pub fn parse_predictions(raw: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (qid, score) = match cols[..] {
            [q, s] | [q, s, _] => (q, s),
            _ => return Err(QppError::parse(i + 1, "expected 'qid score [method]'")),
        };
        let score: f64 = score
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| QppError::parse(i + 1, format!("bad score '{score}'")))?;
        if out.insert(qid.to_string(), score).is_some() {
            return Err(QppError::parse(i + 1, format!("duplicate qid {qid}")));
        }
    }
    Ok(out)
}

pub fn serialize_predictions(values: &BTreeMap<String, f64>, method: &str) -> String {
    values.iter().map(|(q, v)| format!("{q} {v} {method}\n")).collect()
}
