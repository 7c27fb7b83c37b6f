//! Seeded synthetic collections for tests, acceptance checks and demos.
//!
//! Every generator is a pure function of its arguments.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{PairEmbedding, PairEmbeddingStore, Qrels, QrelsRecord, RetrievalRun, RunEntry};
use crate::error::Result;
use crate::rng::{self, Rng};

pub const SYNTHETIC_ENCODER: &str = "synthetic";

/// A run with matching judgments, pair embeddings, collection scores and,
/// for planted fixtures, the query-level labels the embeddings encode.
#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub run: RetrievalRun,
    pub qrels: Qrels,
    pub embeddings: PairEmbeddingStore,
    pub collection_scores: BTreeMap<String, f64>,
    pub planted: BTreeMap<String, f64>,
}

fn normal(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

fn qid(i: usize) -> String {
    format!("q{i:03}")
}

fn docid(q: usize, r: usize) -> String {
    format!("d{q:03}-{r:03}")
}

struct Builder {
    entries: Vec<RunEntry>,
    qrels: Qrels,
    store: PairEmbeddingStore,
    collection_scores: BTreeMap<String, f64>,
    planted: BTreeMap<String, f64>,
}

impl Builder {
    fn new(dim: usize) -> Result<Self> {
        Ok(Self {
            entries: Vec::new(),
            qrels: Qrels::default(),
            store: PairEmbeddingStore::new(dim, SYNTHETIC_ENCODER)?,
            collection_scores: BTreeMap::new(),
            planted: BTreeMap::new(),
        })
    }

    /// `scores` must already be in descending order.
    fn add_doc(&mut self, q: usize, r: usize, score: f64, vec: Vec<f64>, relevant: bool) -> Result<()> {
        let (qid, docid) = (qid(q), docid(q, r));
        self.entries.push(RunEntry {
            qid: qid.clone(),
            docid: docid.clone(),
            rank: r as u32 + 1,
            input_rank: r as u32 + 1,
            score,
        });
        self.qrels.insert(QrelsRecord {
            qid: qid.clone(),
            docid: docid.clone(),
            grade: u32::from(relevant),
        });
        self.store.push(PairEmbedding {
            qid,
            docid,
            rank: r as u32 + 1,
            vec: vec.into_iter().map(|v| v as f32).collect(),
        })
    }

    fn finish(self) -> Result<SyntheticCollection> {
        Ok(SyntheticCollection {
            run: RetrievalRun::from_entries(self.entries)?,
            qrels: self.qrels,
            embeddings: self.store,
            collection_scores: self.collection_scores,
            planted: self.planted,
        })
    }
}

/// Queries whose pair vectors all carry the query's label along a fixed
/// direction, plus small per-document noise. Labels are evenly spread over
/// (0, 1) so the ordering is unambiguous.
pub fn planted_signal(n_queries: usize, depth: usize, dim: usize, seed: u64) -> Result<SyntheticCollection> {
    let mut r = rng::stream(seed, &[0x5e7, 1]);
    let direction: Vec<f64> = {
        let v: Vec<f64> = (0..dim).map(|_| normal(&mut r)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    };
    let mut labels: Vec<f64> = (0..n_queries).map(|i| (i as f64 + 0.5) / n_queries as f64).collect();
    labels.shuffle(&mut r);
    let mut b = Builder::new(dim)?;
    for (q, &label) in labels.iter().enumerate() {
        b.planted.insert(qid(q), label);
        b.collection_scores.insert(qid(q), 5.0);
        for d in 0..depth {
            let score = 10.0 - d as f64 * 0.25 + 0.1 * r.random::<f64>();
            let vec = direction
                .iter()
                .map(|&a| 2.0 * (label - 0.5) * a + 0.05 * normal(&mut r))
                .collect();
            let rel = r.random::<f64>() < label;
            b.add_doc(q, d, score, vec, rel)?;
        }
    }
    b.finish()
}

/// The overfitting fixture: 32 queries × 16 documents, 16-dimensional vectors.
pub fn overfit_fixture(seed: u64) -> Result<SyntheticCollection> {
    planted_signal(32, 16, 16, seed)
}

/// Queries whose label is the spread of a per-document signal around a
/// query-specific offset. A single vector reveals the signal but neither the
/// offset nor the spread, so the label is only recoverable by comparing
/// documents of the same query.
///
/// Coordinate 0 holds the signal, the remaining coordinates are noise. The
/// run ranks documents by the signal.
pub fn dispersion_fixture(n_queries: usize, depth: usize, dim: usize, seed: u64) -> Result<SyntheticCollection> {
    let mut r = rng::stream(seed, &[0x5e7, 2]);
    let mut b = Builder::new(dim)?;
    for q in 0..n_queries {
        let offset = r.random_range(-3.0..3.0);
        let spread: f64 = r.random_range(0.1..1.0);
        b.planted.insert(qid(q), spread);
        b.collection_scores.insert(qid(q), 1.0);
        let mut signal: Vec<f64> = (0..depth).map(|_| offset + spread * normal(&mut r)).collect();
        signal.sort_by(|a, b| b.total_cmp(a));
        for (d, &s) in signal.iter().enumerate() {
            let mut vec = vec![s];
            vec.extend((1..dim).map(|_| 0.1 * normal(&mut r)));
            b.add_doc(q, d, s, vec, d == 0)?;
        }
    }
    b.finish()
}

/// A judged collection for protocol runs. Each query has a latent quality
/// that drives both the score distribution and how many top documents are
/// relevant; pair vectors carry noisy views of the quality and of each
/// document's relevance.
pub fn judged_collection(n_queries: usize, depth: usize, dim: usize, seed: u64) -> Result<SyntheticCollection> {
    let mut r = rng::stream(seed, &[0x5e7, 3]);
    let mut b = Builder::new(dim.max(2))?;
    for q in 0..n_queries {
        let quality: f64 = r.random();
        b.planted.insert(qid(q), quality);
        b.collection_scores.insert(qid(q), 6.0 + 0.5 * r.random::<f64>());
        let mut scores: Vec<f64> = (0..depth)
            .map(|d| 8.0 + 3.0 * quality * (-(d as f64) / 6.0).exp() + 0.3 * normal(&mut r))
            .collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let mut rel: Vec<bool> = (0..depth)
            .map(|d| r.random::<f64>() < 0.02 + 0.9 * quality * (-(d as f64) / 12.0).exp())
            .collect();
        if !rel.iter().any(|&x| x) {
            let at = r.random_range(0..depth);
            rel[at] = true;
        }
        for d in 0..depth {
            let mut vec = vec![
                quality + 0.3 * normal(&mut r),
                f64::from(u8::from(rel[d])) + 0.5 * normal(&mut r),
            ];
            vec.extend((2..dim).map(|_| 0.3 * normal(&mut r)));
            b.add_doc(q, d, scores[d], vec, rel[d])?;
        }
    }
    b.finish()
}
