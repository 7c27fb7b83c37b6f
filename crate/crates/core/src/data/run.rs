use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::error::{QppError, Result};

/// One retrieved document for one query.
///
/// `rank` is the 1-based position after sorting by descending score (ties by
/// ascending docid); `input_rank` keeps the rank column as it appeared in the
/// source file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub docid: String,
    pub rank: u32,
    pub input_rank: u32,
    pub score: f64,
}

/// Per-query ranked lists, keyed by qid in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalRun {
    queries: BTreeMap<String, Vec<RunEntry>>,
}

fn rank_order(a: &RunEntry, b: &RunEntry) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.docid.cmp(&b.docid))
}

impl RetrievalRun {
    /// Build a run from unordered entries; lists are sorted and ranks reassigned.
    pub fn from_entries(entries: impl IntoIterator<Item = RunEntry>) -> Result<Self> {
        let mut queries: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
        for e in entries {
            if e.qid.is_empty() || e.docid.is_empty() {
                return Err(QppError::Input("empty qid or docid in run".into()));
            }
            if !e.score.is_finite() {
                return Err(QppError::Input(format!(
                    "non-finite score for {} {}",
                    e.qid, e.docid
                )));
            }
            queries.entry(e.qid.clone()).or_default().push(e);
        }
        for (qid, list) in queries.iter_mut() {
            let mut seen = HashSet::new();
            for e in list.iter() {
                if !seen.insert(e.docid.as_str()) {
                    return Err(QppError::Input(format!(
                        "duplicate docid {} for query {qid}",
                        e.docid
                    )));
                }
            }
            list.sort_by(rank_order);
            for (i, e) in list.iter_mut().enumerate() {
                e.rank = i as u32 + 1;
            }
        }
        Ok(Self { queries })
    }

    pub fn get(&self, qid: &str) -> Option<&[RunEntry]> {
        self.queries.get(qid).map(Vec::as_slice)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.queries.iter().map(|(q, l)| (q.as_str(), l.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn scores(&self, qid: &str) -> Option<Vec<f64>> {
        self.get(qid).map(|l| l.iter().map(|e| e.score).collect())
    }

    /// Keep only the listed queries.
    pub fn restrict<'a>(&self, qids: impl IntoIterator<Item = &'a str>) -> Self {
        let queries = qids
            .into_iter()
            .filter_map(|q| self.queries.get_key_value(q))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Self { queries }
    }
}

/// Parse a six-column `qid Q0 docid rank score tag` run.
pub fn parse_run(raw: &str) -> Result<RetrievalRun> {
    let mut entries = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(QppError::parse(
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let input_rank: u32 = cols[3]
            .parse()
            .map_err(|_| QppError::parse(lineno, format!("bad rank '{}'", cols[3])))?;
        if input_rank == 0 {
            return Err(QppError::parse(lineno, "rank must be positive"));
        }
        let score: f64 = cols[4]
            .parse()
            .map_err(|_| QppError::parse(lineno, format!("bad score '{}'", cols[4])))?;
        if !score.is_finite() {
            return Err(QppError::parse(lineno, "non-finite score"));
        }
        entries.push(RunEntry {
            qid: cols[0].to_string(),
            docid: cols[2].to_string(),
            rank: input_rank,
            input_rank,
            score,
        });
    }
    if entries.is_empty() {
        return Err(QppError::MissingData("run contains no entries".into()));
    }
    RetrievalRun::from_entries(entries)
}

/// Write the run back in six-column form, using the sorted ranks.
pub fn serialize_run(run: &RetrievalRun, tag: &str) -> String {
    let mut out = String::new();
    for (qid, list) in run.iter() {
        for e in list {
            // `{}` on f64 is the shortest representation that round-trips.
            let _ = writeln!(out, "{qid} Q0 {} {} {} {tag}", e.docid, e.rank, e.score);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let run = parse_run("301 Q0 FBIS3-1 1 14.27 QL").unwrap();
        let list = run.get("301").unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].docid, "FBIS3-1");
        assert_eq!(list[0].rank, 1);
        assert_eq!(list[0].score, 14.27);
    }

    #[test]
    fn resorted_by_score() {
        let run = parse_run("1 Q0 a 1 2.0 t\n1 Q0 b 2 5.0 t\n").unwrap();
        let scores: Vec<f64> = run.get("1").unwrap().iter().map(|e| e.score).collect();
        assert_eq!(scores, vec![5.0, 2.0]);
        let l = run.get("1").unwrap();
        assert_eq!((l[0].rank, l[0].input_rank), (1, 2));
    }

    #[test]
    fn ties_by_docid() {
        let run = parse_run("1 Q0 zz 1 3 t\n1 Q0 aa 2 3 t\n").unwrap();
        let ids: Vec<&str> = run.get("1").unwrap().iter().map(|e| e.docid.as_str()).collect();
        assert_eq!(ids, vec!["aa", "zz"]);
    }

    #[test]
    fn bad_score_reports_line() {
        match parse_run("301 Q0 doc1 1 abc QL") {
            Err(QppError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse_run("1 Q0 a 1 1.0 t\n1 Q0 b 2 t\n") {
            Err(QppError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_is_missing_data() {
        assert!(matches!(parse_run(""), Err(QppError::MissingData(_))));
        assert!(matches!(parse_run("\n  \n"), Err(QppError::MissingData(_))));
    }

    fn arb_run() -> impl Strategy<Value = RetrievalRun> {
        prop::collection::btree_map(
            "[a-z0-9]{1,4}",
            prop::collection::btree_map("[A-Za-z0-9-]{1,6}", -1e6f64..1e6, 1..6),
            1..5,
        )
        .prop_map(|m| {
            let entries = m.into_iter().flat_map(|(q, docs)| {
                docs.into_iter().enumerate().map(move |(i, (d, s))| RunEntry {
                    qid: q.clone(),
                    docid: d,
                    rank: i as u32 + 1,
                    input_rank: i as u32 + 1,
                    score: s,
                })
            });
            RetrievalRun::from_entries(entries).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(run in arb_run()) {
            let text = serialize_run(&run, "tag");
            let mut back = parse_run(&text).unwrap();
            // input_rank of the reparsed run equals the serialized rank.
            let mut orig = run.clone();
            for l in orig.queries.values_mut() {
                for e in l.iter_mut() { e.input_rank = e.rank; }
            }
            for l in back.queries.values_mut() {
                for e in l.iter_mut() { e.input_rank = e.rank; }
            }
            prop_assert_eq!(back, orig);
        }
    }
}
