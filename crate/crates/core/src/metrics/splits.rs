use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{QppError, Result};
use crate::rng;

pub const DEFAULT_SPLITS: usize = 30;

/// One balanced bipartition: train on `fold1`, test on `fold2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub fold1: Vec<String>,
    pub fold2: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub splits: Vec<Split>,
}

/// Draw `n_splits` random balanced bipartitions; fold 1 gets the extra query
/// when the count is odd. Both folds are returned sorted.
pub fn make_splits<S: AsRef<str>>(qids: &[S], n_splits: usize, seed: u64) -> Result<SplitPlan> {
    let mut ids: Vec<String> = qids.iter().map(|q| q.as_ref().to_string()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() != qids.len() {
        return Err(QppError::Input("duplicate qids in split input".into()));
    }
    if ids.len() < 2 {
        return Err(QppError::Input("need at least 2 queries to split".into()));
    }
    let half = ids.len().div_ceil(2);
    let splits = (0..n_splits)
        .map(|i| {
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng::stream(seed, &[0x5917, i as u64]));
            let mut fold1 = shuffled[..half].to_vec();
            let mut fold2 = shuffled[half..].to_vec();
            fold1.sort();
            fold2.sort();
            Split { fold1, fold2 }
        })
        .collect();
    Ok(SplitPlan { seed, splits })
}

impl SplitPlan {
    /// Lines of `split_index fold_index qid`, fold index 1 or 2.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.splits.iter().enumerate() {
            for (f, fold) in [(1, &s.fold1), (2, &s.fold2)] {
                for q in fold {
                    let _ = writeln!(out, "{i} {f} {q}");
                }
            }
        }
        out
    }

    pub fn import(raw: &str, seed: u64) -> Result<Self> {
        let mut splits: Vec<Split> = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [idx, fold, qid] = cols[..] else {
                return Err(QppError::parse(n + 1, "expected 'split_index fold_index qid'"));
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| QppError::parse(n + 1, "bad split index"))?;
            while splits.len() <= idx {
                splits.push(Split {
                    fold1: Vec::new(),
                    fold2: Vec::new(),
                });
            }
            match fold {
                "1" => splits[idx].fold1.push(qid.to_string()),
                "2" => splits[idx].fold2.push(qid.to_string()),
                _ => return Err(QppError::parse(n + 1, "fold index must be 1 or 2")),
            }
        }
        for (i, s) in splits.iter_mut().enumerate() {
            s.fold1.sort();
            s.fold2.sort();
            let a: BTreeSet<&String> = s.fold1.iter().collect();
            let b: BTreeSet<&String> = s.fold2.iter().collect();
            if s.fold1.is_empty() || s.fold2.is_empty() || a.intersection(&b).next().is_some() {
                return Err(QppError::Format(format!("split {i} is not a bipartition")));
            }
        }
        Ok(SplitPlan { seed, splits })
    }
}
