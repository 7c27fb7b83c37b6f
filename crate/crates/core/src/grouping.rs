//! Groups of (query, document) pairs, the unit the groupwise predictor sees.
//!
//! Five strategies decide which pairs share a group and which position id
//! each slot carries:
//!
//! | strategy       | groups                                         | position id                    |
//! |----------------|------------------------------------------------|--------------------------------|
//! | `RandomOrder`  | all pairs shuffled, chunked                    | slot index                     |
//! | `QueryOrder`   | the i-th ranked doc of up to n queries         | rank of the query by initial QPP |
//! | `DocOrder`     | consecutive ranks of one query                 | (rank − 1) mod n               |
//! | `QueryPlusDoc` | QueryOrder ∪ DocOrder groups, shuffled         | per kind                       |
//! | `Rqd`          | all three kinds, shuffled                      | per kind                       |

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::RetrievalRun;
use crate::error::{QppError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupingStrategy {
    RandomOrder,
    QueryOrder,
    DocOrder,
    QueryPlusDoc,
    Rqd,
}

impl GroupingStrategy {
    pub const ALL: [GroupingStrategy; 5] = [
        GroupingStrategy::RandomOrder,
        GroupingStrategy::QueryOrder,
        GroupingStrategy::DocOrder,
        GroupingStrategy::QueryPlusDoc,
        GroupingStrategy::Rqd,
    ];

    pub fn needs_initial_qpp(self) -> bool {
        matches!(
            self,
            GroupingStrategy::QueryOrder | GroupingStrategy::QueryPlusDoc | GroupingStrategy::Rqd
        )
    }

    fn kinds(self) -> &'static [GroupKind] {
        match self {
            GroupingStrategy::RandomOrder => &[GroupKind::Random],
            GroupingStrategy::QueryOrder => &[GroupKind::Query],
            GroupingStrategy::DocOrder => &[GroupKind::Doc],
            GroupingStrategy::QueryPlusDoc => &[GroupKind::Query, GroupKind::Doc],
            GroupingStrategy::Rqd => &[GroupKind::Random, GroupKind::Query, GroupKind::Doc],
        }
    }

    /// Grouping used when scoring queries with a model trained under `self`.
    /// Mixed strategies fall back to per-query document groups.
    pub fn default_inference(self) -> GroupingStrategy {
        match self {
            GroupingStrategy::QueryPlusDoc | GroupingStrategy::Rqd => GroupingStrategy::DocOrder,
            s => s,
        }
    }
}

impl fmt::Display for GroupingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingStrategy::RandomOrder => "random",
            GroupingStrategy::QueryOrder => "query",
            GroupingStrategy::DocOrder => "doc",
            GroupingStrategy::QueryPlusDoc => "query+doc",
            GroupingStrategy::Rqd => "rqd",
        })
    }
}

impl FromStr for GroupingStrategy {
    type Err = QppError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "random" | "randomorder" => GroupingStrategy::RandomOrder,
            "query" | "queryorder" => GroupingStrategy::QueryOrder,
            "doc" | "docorder" => GroupingStrategy::DocOrder,
            "query+doc" | "queryplusdoc" => GroupingStrategy::QueryPlusDoc,
            "rqd" | "r+q+d" => GroupingStrategy::Rqd,
            _ => return Err(QppError::Input(format!("unknown grouping strategy '{s}'"))),
        })
    }
}

/// Which ordering produced a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Random,
    Query,
    Doc,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::Random => "random",
            GroupKind::Query => "query",
            GroupKind::Doc => "doc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub qid: String,
    pub docid: String,
}

impl PairKey {
    pub fn new(qid: impl Into<String>, docid: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            docid: docid.into(),
        }
    }
}

/// A fixed-size batch of pairs. Padded slots have `items[i] == None` and
/// `mask[i] == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub items: Vec<Option<PairKey>>,
    pub position_ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub kind: GroupKind,
}

impl Group {
    pub fn new(items: Vec<PairKey>, position_ids: Vec<usize>, kind: GroupKind) -> Result<Self> {
        if items.len() != position_ids.len() {
            return Err(QppError::Contract("items and position ids differ in length".into()));
        }
        Ok(Self {
            mask: vec![true; items.len()],
            items: items.into_iter().map(Some).collect(),
            position_ids,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn valid(&self) -> impl Iterator<Item = (usize, &PairKey)> {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (i, p)))
    }

    pub fn num_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Append masked slots until the group holds `n`.
pub fn pad_group(mut group: Group, n: usize) -> Result<Group> {
    if group.num_valid() == 0 {
        return Err(QppError::Input("cannot pad an empty group".into()));
    }
    if group.len() > n {
        return Err(QppError::Input(format!(
            "group of {} exceeds size {n}",
            group.len()
        )));
    }
    while group.len() < n {
        group.items.push(None);
        group.position_ids.push(0);
        group.mask.push(false);
    }
    Ok(group)
}

const RANDOM_STREAM: u64 = 0x7241;
const QUERY_STREAM: u64 = 0x7242;
const ORDER_STREAM: u64 = 0x7243;

/// Build one epoch of groups.
///
/// `initial_qpp` orders queries inside `QueryOrder` groups (descending, ties
/// by qid) and must cover every query of the run for strategies that use it.
pub fn build_groups(
    strategy: GroupingStrategy,
    run: &RetrievalRun,
    depth: usize,
    n: usize,
    seed: u64,
    epoch: usize,
    initial_qpp: Option<&BTreeMap<String, f64>>,
) -> Result<Vec<Group>> {
    if depth == 0 || n == 0 {
        return Err(QppError::Input("depth and group size must be >= 1".into()));
    }
    if run.is_empty() {
        return Err(QppError::Input("no queries to group".into()));
    }
    let short: Vec<&str> = run
        .iter()
        .filter(|(_, l)| l.len() < depth)
        .map(|(q, _)| q)
        .collect();
    if !short.is_empty() && epoch == 0 {
        warn!(
            "{} of {} queries have fewer than {depth} documents; using what is available",
            short.len(),
            run.len()
        );
    }

    let epoch = epoch as u64;
    let mut groups = Vec::new();
    for kind in strategy.kinds() {
        match kind {
            GroupKind::Random => groups.extend(random_groups(run, depth, n, seed, epoch)?),
            GroupKind::Query => {
                let qpp = initial_qpp.ok_or_else(|| {
                    QppError::Input(format!("strategy {strategy} needs an initial QPP"))
                })?;
                groups.extend(query_groups(run, depth, n, seed, epoch, qpp)?);
            }
            GroupKind::Doc => groups.extend(doc_groups(run, depth, n)?),
        }
    }
    groups.shuffle(&mut rng::stream(seed, &[ORDER_STREAM, epoch]));
    Ok(groups)
}

fn random_groups(
    run: &RetrievalRun,
    depth: usize,
    n: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Group>> {
    let mut pairs: Vec<PairKey> = run
        .iter()
        .flat_map(|(q, l)| l.iter().take(depth).map(move |e| PairKey::new(q, &e.docid)))
        .collect();
    pairs.shuffle(&mut rng::stream(seed, &[RANDOM_STREAM, epoch]));
    pairs
        .chunks(n)
        .map(|c| {
            let g = Group::new(c.to_vec(), (0..c.len()).collect(), GroupKind::Random)?;
            pad_group(g, n)
        })
        .collect()
}

fn query_groups(
    run: &RetrievalRun,
    depth: usize,
    n: usize,
    seed: u64,
    epoch: u64,
    qpp: &BTreeMap<String, f64>,
) -> Result<Vec<Group>> {
    if let Some(q) = run.qids().find(|q| !qpp.contains_key(*q)) {
        return Err(QppError::Input(format!("initial QPP has no entry for query {q}")));
    }
    let mut qids: Vec<&str> = run.qids().collect();
    qids.shuffle(&mut rng::stream(seed, &[QUERY_STREAM, epoch]));
    let max_len = run.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for rank in 0..depth.min(max_len) {
        let members: Vec<(&str, &str)> = qids
            .iter()
            .filter_map(|q| run.get(q).unwrap().get(rank).map(|e| (*q, e.docid.as_str())))
            .collect();
        for chunk in members.chunks(n) {
            let mut order: Vec<usize> = (0..chunk.len()).collect();
            order.sort_by(|&a, &b| {
                let (qa, qb) = (chunk[a].0, chunk[b].0);
                qpp[qb].total_cmp(&qpp[qa]).then_with(|| qa.cmp(qb))
            });
            let mut pos = vec![0; chunk.len()];
            for (r, &slot) in order.iter().enumerate() {
                pos[slot] = r;
            }
            let items = chunk.iter().map(|(q, d)| PairKey::new(*q, *d)).collect();
            out.push(pad_group(Group::new(items, pos, GroupKind::Query)?, n)?);
        }
    }
    Ok(out)
}

fn doc_groups(run: &RetrievalRun, depth: usize, n: usize) -> Result<Vec<Group>> {
    let mut out = Vec::new();
    for (q, list) in run.iter() {
        let top = &list[..depth.min(list.len())];
        for chunk in top.chunks(n) {
            let items = chunk.iter().map(|e| PairKey::new(q, &e.docid)).collect();
            let pos = chunk.iter().map(|e| (e.rank as usize - 1) % n).collect();
            out.push(pad_group(Group::new(items, pos, GroupKind::Doc)?, n)?);
        }
    }
    Ok(out)
}

/// Debug dump: `group_id slot qid docid position_id mask kind`; padded slots show `-`.
pub fn dump_groups(groups: &[Group]) -> String {
    let mut out = String::new();
    for (g, group) in groups.iter().enumerate() {
        for slot in 0..group.len() {
            let (q, d) = group.items[slot]
                .as_ref()
                .map_or(("-", "-"), |p| (p.qid.as_str(), p.docid.as_str()));
            let _ = writeln!(
                out,
                "{g} {slot} {q} {d} {} {} {}",
                group.position_ids[slot],
                u8::from(group.mask[slot]),
                group.kind
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RunEntry;
    use std::collections::HashMap;

    fn run(queries: usize, docs: usize) -> RetrievalRun {
        let entries = (0..queries).flat_map(|q| {
            (0..docs).map(move |d| RunEntry {
                qid: format!("q{q}"),
                docid: format!("d{q}-{d:02}"),
                rank: 0,
                input_rank: 0,
                score: 100.0 - d as f64,
            })
        });
        RetrievalRun::from_entries(entries).unwrap()
    }

    fn qpp(run: &RetrievalRun) -> BTreeMap<String, f64> {
        run.qids().enumerate().map(|(i, q)| (q.to_string(), (i * 7 % 5) as f64)).collect()
    }

    #[test]
    fn doc_order_single_query() {
        let r = run(1, 4);
        let g = build_groups(GroupingStrategy::DocOrder, &r, 4, 4, 0, 0, None).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].position_ids, vec![0, 1, 2, 3]);
        assert_eq!(g[0].mask, vec![true; 4]);
    }

    #[test]
    fn query_order_positions_follow_initial_qpp() {
        let r = run(3, 1);
        let init: BTreeMap<String, f64> =
            [("q0", 0.5), ("q1", 0.9), ("q2", 0.1)].iter().map(|(q, v)| (q.to_string(), *v)).collect();
        for seed in 0..5 {
            let g = build_groups(GroupingStrategy::QueryOrder, &r, 1, 3, seed, 0, Some(&init)).unwrap();
            assert_eq!(g.len(), 1);
            let by_q: HashMap<&str, usize> = g[0]
                .valid()
                .map(|(i, p)| (p.qid.as_str(), g[0].position_ids[i]))
                .collect();
            assert_eq!((by_q["q1"], by_q["q0"], by_q["q2"]), (0, 1, 2));
        }
    }

    #[test]
    fn pointwise_groups() {
        let r = run(3, 5);
        let g = build_groups(GroupingStrategy::RandomOrder, &r, 5, 1, 1, 0, None).unwrap();
        assert_eq!(g.len(), 15);
        assert!(g.iter().all(|g| g.len() == 1 && g.position_ids == [0]));
    }

    #[test]
    fn padding() {
        let items = (0..3).map(|i| PairKey::new("q", format!("d{i}"))).collect();
        let g = Group::new(items, vec![0, 1, 2], GroupKind::Doc).unwrap();
        let p = pad_group(g.clone(), 4).unwrap();
        assert_eq!(p.mask, vec![true, true, true, false]);
        assert_eq!(pad_group(p.clone(), 4).unwrap(), p);
        let empty = Group::new(vec![], vec![], GroupKind::Doc).unwrap();
        assert!(pad_group(empty, 4).is_err());
    }

    #[test]
    fn missing_initial_qpp() {
        let r = run(2, 2);
        assert!(build_groups(GroupingStrategy::Rqd, &r, 2, 2, 0, 0, None).is_err());
        let partial: BTreeMap<String, f64> = [("q0".to_string(), 1.0)].into();
        assert!(build_groups(GroupingStrategy::QueryOrder, &r, 2, 2, 0, 0, Some(&partial)).is_err());
    }

    #[test]
    fn coverage_and_permutation_invariants() {
        let r = run(7, 11);
        let init = qpp(&r);
        for strategy in GroupingStrategy::ALL {
            for n in [1, 3, 8] {
                let groups = build_groups(strategy, &r, 9, n, 42, 1, Some(&init)).unwrap();
                for g in &groups {
                    assert_eq!(g.len(), n);
                    let mut ids: Vec<usize> = g.valid().map(|(i, _)| g.position_ids[i]).collect();
                    ids.sort_unstable();
                    assert_eq!(ids, (0..g.num_valid()).collect::<Vec<_>>());
                }
                for kind in strategy.kinds() {
                    let mut seen: Vec<&PairKey> = groups
                        .iter()
                        .filter(|g| g.kind == *kind)
                        .flat_map(|g| g.valid().map(|(_, p)| p))
                        .collect();
                    let total = seen.len();
                    seen.sort();
                    seen.dedup();
                    assert_eq!(total, 7 * 9, "{strategy} {kind}");
                    assert_eq!(seen.len(), total);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_reshuffled_per_epoch() {
        let r = run(6, 6);
        let init = qpp(&r);
        let a = build_groups(GroupingStrategy::Rqd, &r, 6, 4, 5, 0, Some(&init)).unwrap();
        let b = build_groups(GroupingStrategy::Rqd, &r, 6, 4, 5, 0, Some(&init)).unwrap();
        let c = build_groups(GroupingStrategy::Rqd, &r, 6, 4, 5, 1, Some(&init)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), c.len());
    }

    #[test]
    fn short_lists_contribute_available_ranks() {
        let r = run(2, 3);
        let g = build_groups(GroupingStrategy::DocOrder, &r, 10, 4, 0, 0, None).unwrap();
        assert_eq!(g.iter().map(Group::num_valid).sum::<usize>(), 6);
    }

    #[test]
    fn dump_format() {
        let r = run(1, 3);
        let g = build_groups(GroupingStrategy::DocOrder, &r, 3, 4, 0, 0, None).unwrap();
        let text = dump_groups(&g);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0 0 q0 d0-00 0 1 doc");
        assert_eq!(lines[3], "0 3 - - 0 0 doc");
    }
}
