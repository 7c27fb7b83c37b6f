use std::collections::BTreeMap;

use log::warn;

use crate::error::{QppError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelsRecord {
    pub qid: String,
    pub docid: String,
    pub grade: u32,
}

/// Graded judgments indexed by query then document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judged: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn from_records(records: impl IntoIterator<Item = QrelsRecord>) -> Self {
        let mut q = Self::default();
        for r in records {
            q.insert(r);
        }
        q
    }

    /// Returns the previous grade when the pair was already judged.
    pub fn insert(&mut self, r: QrelsRecord) -> Option<u32> {
        self.judged
            .entry(r.qid)
            .or_default()
            .insert(r.docid, r.grade)
    }

    pub fn grade(&self, qid: &str, docid: &str) -> Option<u32> {
        self.judged.get(qid)?.get(docid).copied()
    }

    pub fn is_relevant(&self, qid: &str, docid: &str) -> bool {
        self.grade(qid, docid).is_some_and(|g| g >= 1)
    }

    /// Number of judged-relevant documents for a query.
    pub fn num_relevant(&self, qid: &str) -> usize {
        self.judged
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g >= 1).count())
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.judged.contains_key(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.judged.keys().map(String::as_str)
    }

    pub fn records(&self) -> impl Iterator<Item = QrelsRecord> + '_ {
        self.judged.iter().flat_map(|(q, docs)| {
            docs.iter().map(move |(d, &g)| QrelsRecord {
                qid: q.clone(),
                docid: d.clone(),
                grade: g,
            })
        })
    }

    pub fn len(&self) -> usize {
        self.judged.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `qid 0 docid grade` lines in query then document order.
pub fn serialize_qrels(qrels: &Qrels) -> String {
    qrels
        .records()
        .map(|r| format!("{} 0 {} {}\n", r.qid, r.docid, r.grade))
        .collect()
}

/// Parse `qid 0 docid grade` lines. Later duplicates override earlier ones.
pub fn parse_qrels(raw: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(QppError::parse(
                lineno,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade: i64 = cols[3]
            .parse()
            .map_err(|_| QppError::parse(lineno, format!("bad grade '{}'", cols[3])))?;
        if grade < 0 {
            return Err(QppError::parse(lineno, format!("negative grade {grade}")));
        }
        let rec = QrelsRecord {
            qid: cols[0].to_string(),
            docid: cols[2].to_string(),
            grade: grade as u32,
        };
        if let Some(prev) = qrels.insert(rec) {
            warn!(
                "qrels line {lineno}: duplicate judgment for ({}, {}), replacing grade {prev}",
                cols[0], cols[2]
            );
        }
    }
    Ok(qrels)
}
