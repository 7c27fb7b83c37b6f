use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Qrels;
use crate::error::QppError;

/// Which effectiveness measure a label holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LabelKind {
    PrecisionAt(usize),
    AveragePrecision(usize),
}

impl LabelKind {
    pub const AP1000: LabelKind = LabelKind::AveragePrecision(1000);
    pub const P10: LabelKind = LabelKind::PrecisionAt(10);

    /// `None` when the query has no judged-relevant document.
    pub fn evaluate<S: AsRef<str>>(&self, qid: &str, ranked: &[S], qrels: &Qrels) -> Option<f64> {
        match *self {
            LabelKind::PrecisionAt(k) => {
                (qrels.num_relevant(qid) > 0).then(|| precision_at_k(qid, ranked, qrels, k))
            }
            LabelKind::AveragePrecision(cutoff) => average_precision(qid, ranked, qrels, cutoff),
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelKind::PrecisionAt(k) => write!(f, "P@{k}"),
            LabelKind::AveragePrecision(c) => write!(f, "AP@{c}"),
        }
    }
}

impl FromStr for LabelKind {
    type Err = QppError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || QppError::Input(format!("unknown label kind '{s}' (expected P@k or AP@n)"));
        let (name, depth) = s.split_once('@').ok_or_else(bad)?;
        let depth: usize = depth.parse().map_err(|_| bad())?;
        if depth == 0 {
            return Err(bad());
        }
        match name.to_ascii_uppercase().as_str() {
            "P" => Ok(LabelKind::PrecisionAt(depth)),
            "AP" => Ok(LabelKind::AveragePrecision(depth)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for LabelKind {
    type Error = QppError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LabelKind> for String {
    fn from(k: LabelKind) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryLabel {
    pub qid: String,
    pub value: f64,
    pub kind: LabelKind,
}

/// Relevant documents in the top `k`, divided by `k` regardless of list length.
pub fn precision_at_k<S: AsRef<str>>(qid: &str, ranked: &[S], qrels: &Qrels, k: usize) -> f64 {
    assert!(k >= 1, "precision_at_k needs k >= 1");
    let hits = ranked
        .iter()
        .take(k)
        .filter(|d| qrels.is_relevant(qid, d.as_ref()))
        .count();
    hits as f64 / k as f64
}

/// Average precision over the top `cutoff` results, normalised by every
/// judged-relevant document of the query. `None` if there are none.
pub fn average_precision<S: AsRef<str>>(
    qid: &str,
    ranked: &[S],
    qrels: &Qrels,
    cutoff: usize,
) -> Option<f64> {
    assert!(cutoff >= 1, "average_precision needs cutoff >= 1");
    let total = qrels.num_relevant(qid);
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().take(cutoff).enumerate() {
        if qrels.is_relevant(qid, d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total as f64)
}
