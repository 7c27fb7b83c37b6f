use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::encoder::PairSource;
use super::network::GroupwiseModel;
use crate::data::RetrievalRun;
use crate::error::{QppError, Result};
use crate::grouping::{build_groups, GroupingStrategy, PairKey};

/// How per-document predictions become one query-level value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Aggregation {
    Max,
    Mean,
    FirstRankedDoc,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::Max, Aggregation::Mean, Aggregation::FirstRankedDoc];
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
            Aggregation::FirstRankedDoc => "first",
        })
    }
}

impl FromStr for Aggregation {
    type Err = QppError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "max" => Aggregation::Max,
            "mean" | "avg" => Aggregation::Mean,
            "first" | "firstrankeddoc" => Aggregation::FirstRankedDoc,
            _ => return Err(QppError::Input(format!("unknown aggregation '{s}'"))),
        })
    }
}

impl From<Aggregation> for String {
    fn from(a: Aggregation) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Aggregation {
    type Error = QppError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Aggregate predictions listed in rank order.
pub fn aggregate(by_rank: &[f64], how: Aggregation) -> Result<f64> {
    if by_rank.is_empty() {
        return Err(QppError::Input("no predictions to aggregate".into()));
    }
    Ok(match how {
        Aggregation::Max => by_rank.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => by_rank.iter().sum::<f64>() / by_rank.len() as f64,
        Aggregation::FirstRankedDoc => by_rank[0],
    })
}

/// Inference grouping: strategy (already mapped to its inference form),
/// group size, top-t depth and the seed for randomised groupings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceSpec {
    pub strategy: GroupingStrategy,
    pub group_size: usize,
    pub depth: usize,
    pub seed: u64,
}

/// Per-document predictions of each query, in rank order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairPredictions {
    pub by_query: BTreeMap<String, Vec<f64>>,
}

impl PairPredictions {
    pub fn aggregate(&self, how: Aggregation) -> Result<BTreeMap<String, f64>> {
        self.by_query
            .iter()
            .map(|(q, p)| Ok((q.clone(), aggregate(p, how)?)))
            .collect()
    }
}

/// Predict every top-t pair of `run`.
pub fn predict_pairs(
    model: &GroupwiseModel,
    run: &RetrievalRun,
    source: &PairSource,
    spec: InferenceSpec,
    initial_qpp: Option<&BTreeMap<String, f64>>,
) -> Result<PairPredictions> {
    if spec.depth == 0 {
        return Err(QppError::Input("inference depth must be >= 1".into()));
    }
    let groups = build_groups(
        spec.strategy,
        run,
        spec.depth,
        spec.group_size,
        spec.seed,
        0,
        initial_qpp,
    )?;
    let mut values: HashMap<PairKey, f64> = HashMap::new();
    for g in &groups {
        for (slot, v) in model.predict_group(g, source)? {
            values.insert(g.items[slot].clone().expect("valid slot"), v);
        }
    }
    let mut by_query = BTreeMap::new();
    for (q, list) in run.iter() {
        let preds = list
            .iter()
            .take(spec.depth)
            .map(|e| {
                values.get(&PairKey::new(q, &e.docid)).copied().ok_or_else(|| {
                    QppError::Contract(format!("pair ({q}, {}) was not grouped", e.docid))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        by_query.insert(q.to_string(), preds);
    }
    Ok(PairPredictions { by_query })
}

pub fn predict_queries(
    model: &GroupwiseModel,
    run: &RetrievalRun,
    source: &PairSource,
    spec: InferenceSpec,
    initial_qpp: Option<&BTreeMap<String, f64>>,
    how: Aggregation,
) -> Result<BTreeMap<String, f64>> {
    predict_pairs(model, run, source, spec, initial_qpp)?.aggregate(how)
}

/// Query-level prediction for a single query.
///
/// Query-ordered groupings mix queries, so they are built over `run` as a
/// whole; document and random groupings only see `qid`'s list.
pub fn predict_query(
    model: &GroupwiseModel,
    qid: &str,
    run: &RetrievalRun,
    source: &PairSource,
    spec: InferenceSpec,
    initial_qpp: Option<&BTreeMap<String, f64>>,
    how: Aggregation,
) -> Result<f64> {
    if run.get(qid).is_none_or(|l| l.is_empty()) {
        return Err(QppError::Input(format!("query {qid} has no retrieved documents")));
    }
    let scope = if spec.strategy.needs_initial_qpp() {
        run.clone()
    } else {
        run.restrict([qid])
    };
    let preds = predict_pairs(model, &scope, source, spec, initial_qpp)?;
    aggregate(&preds.by_query[qid], how)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aggregation_fixture() {
        let p = [0.2, 0.8, 0.5];
        assert_eq!(aggregate(&p, Aggregation::Max).unwrap(), 0.8);
        assert_eq!(aggregate(&p, Aggregation::Mean).unwrap(), 0.5);
        assert_eq!(aggregate(&p, Aggregation::FirstRankedDoc).unwrap(), 0.2);
        for a in Aggregation::ALL {
            assert_eq!(aggregate(&[0.3], a).unwrap(), 0.3);
            assert_eq!(a.to_string().parse::<Aggregation>().unwrap(), a);
        }
        assert!(aggregate(&[], Aggregation::Mean).is_err());
    }

    proptest! {
        #[test]
        fn aggregation_bounds(p in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = aggregate(&p, Aggregation::Mean).unwrap();
            let max = aggregate(&p, Aggregation::Max).unwrap();
            let first = aggregate(&p, Aggregation::FirstRankedDoc).unwrap();
            prop_assert!(lo - 1e-12 <= mean && mean <= max + 1e-12);
            prop_assert!(lo <= first && first <= max);
        }
    }
}
