use std::collections::{BTreeMap, HashSet};

use crate::error::{QppError, Result};

pub const DEFAULT_WINDOW: usize = 150;
pub const DEFAULT_STRIDE: usize = 75;

/// Lower-case and split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub qid: String,
    pub tokens: Vec<String>,
}

impl QueryRecord {
    pub fn new(qid: impl Into<String>, text: &str) -> Result<Self> {
        let qid = qid.into();
        let tokens = tokenize(text);
        if qid.is_empty() {
            return Err(QppError::Input("empty qid".into()));
        }
        if tokens.is_empty() {
            return Err(QppError::Input(format!("query {qid} has no tokens")));
        }
        Ok(Self { qid, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocRecord {
    pub docid: String,
    pub tokens: Vec<String>,
}

impl DocRecord {
    pub fn new(docid: impl Into<String>, text: &str) -> Result<Self> {
        let docid = docid.into();
        if docid.is_empty() {
            return Err(QppError::Input("empty docid".into()));
        }
        Ok(Self {
            docid,
            tokens: tokenize(text),
        })
    }
}

/// Parse `id<TAB>text` lines (queries or corpus) into an ordered map.
pub fn parse_texts(raw: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| QppError::parse(i + 1, "expected 'id<TAB>text'"))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(QppError::parse(i + 1, "empty id"));
        }
        if out.insert(id.to_string(), text.to_string()).is_some() {
            return Err(QppError::parse(i + 1, format!("duplicate id {id}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassageWindow {
    pub start: usize,
    pub tokens: Vec<String>,
}

/// Sliding windows over a token sequence.
///
/// Windows start at 0, stride, 2*stride, ...; a window is emitted only while
/// it still contains a token no earlier window covered.
pub fn slice_passages(
    doc_tokens: &[String],
    window: usize,
    stride: usize,
) -> Result<Vec<PassageWindow>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(QppError::Input(format!(
            "invalid window/stride {window}/{stride}"
        )));
    }
    if doc_tokens.is_empty() {
        return Err(QppError::Input("cannot slice an empty document".into()));
    }
    let n = doc_tokens.len();
    let mut out = Vec::new();
    let mut covered = 0;
    let mut start = 0;
    while start < n && covered < n {
        let end = (start + window).min(n);
        out.push(PassageWindow {
            start,
            tokens: doc_tokens[start..end].to_vec(),
        });
        covered = end;
        start += stride;
    }
    Ok(out)
}

/// Default desk-scale passage scorer: how many query tokens (with
/// multiplicity) occur somewhere in the passage.
pub fn lexical_overlap(query: &QueryRecord, passage: &PassageWindow) -> f64 {
    let present: HashSet<&str> = passage.tokens.iter().map(String::as_str).collect();
    query
        .tokens
        .iter()
        .filter(|t| present.contains(t.as_str()))
        .count() as f64
}

/// Index of the best-scoring passage; ties go to the smallest start offset.
pub fn select_top_passage<F>(query: &QueryRecord, passages: &[PassageWindow], scorer: F) -> usize
where
    F: Fn(&QueryRecord, &PassageWindow) -> f64,
{
    assert!(!passages.is_empty(), "select_top_passage needs a passage");
    let mut best = 0;
    let mut best_score = scorer(query, &passages[0]);
    for (i, p) in passages.iter().enumerate().skip(1) {
        let s = scorer(query, p);
        if s > best_score || (s == best_score && p.start < passages[best].start) {
            best = i;
            best_score = s;
        }
    }
    best
}
