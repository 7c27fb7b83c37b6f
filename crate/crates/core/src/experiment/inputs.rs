use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use log::info;

use super::config::ExperimentConfig;
use super::labels::{compute_labels, label_values, parse_label_file};
use crate::baselines::{parse_collection_scores, QuerySideInfo};
use crate::data::{
    lexical_overlap, parse_qrels, parse_run, parse_texts, read_to_string, select_top_passage,
    slice_passages, tokenize, DocRecord, PairEmbeddingStore, QueryRecord, RetrievalRun,
};
use crate::error::{QppError, Result};
use crate::grouping::PairKey;
use crate::model::{EncoderConfig, ModelConfig, PairSource, PairTokens, PredictorConfig};
use crate::synthetic::SyntheticCollection;

/// Loaded data for a protocol run.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub run: RetrievalRun,
    /// Supervision for learned methods.
    pub labels: BTreeMap<String, f64>,
    pub label_kind: String,
    /// What predictions are correlated against.
    pub targets: BTreeMap<String, f64>,
    pub target_kind: String,
    pub source: Option<PairSource>,
    pub side: QuerySideInfo,
}

impl ExperimentInputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_paths()?;
        let run_path = cfg
            .run
            .as_ref()
            .ok_or_else(|| QppError::Input("no run file configured".into()))?;
        let run = parse_run(&read_to_string(run_path)?)?;

        let (labels, label_kind, targets, target_kind) = match (&cfg.labels, &cfg.qrels) {
            (Some(path), _) => {
                let f = parse_label_file(&read_to_string(path)?)?;
                (f.values.clone(), f.kind.clone(), f.values, f.kind)
            }
            (None, Some(path)) => {
                let qrels = parse_qrels(&read_to_string(path)?)?;
                let labels = label_values(&compute_labels(&run, &qrels, cfg.label_kind)?);
                let targets = label_values(&compute_labels(&run, &qrels, cfg.target_kind)?);
                (labels, cfg.label_kind.to_string(), targets, cfg.target_kind.to_string())
            }
            (None, None) => {
                return Err(QppError::Input("configure either qrels or a label file".into()))
            }
        };

        let mut side = QuerySideInfo::default();
        if let Some(p) = &cfg.collection_scores {
            side.collection_scores = parse_collection_scores(&read_to_string(p)?)?;
        }
        let queries = cfg
            .queries
            .as_ref()
            .map(|p| read_to_string(p).and_then(|raw| parse_texts(&raw)))
            .transpose()?;
        if let Some(q) = &queries {
            side.query_lengths = q.iter().map(|(id, t)| (id.clone(), tokenize(t).len().max(1))).collect();
        }

        let source = if let Some(p) = &cfg.embeddings {
            Some(PairSource::Frozen(Arc::new(PairEmbeddingStore::load(p)?)))
        } else if let (Some(q), Some(c)) = (&queries, &cfg.corpus) {
            let corpus = parse_texts(&read_to_string(c)?)?;
            let depth = cfg.train_depth.max(cfg.infer_depth);
            let tokens = pair_tokens(&run, q, &corpus, depth, cfg.window, cfg.stride, &cfg.encoder_config())?;
            Some(PairSource::Tokens(Arc::new(tokens)))
        } else {
            None
        };
        if source.is_none() && cfg.needs_model() {
            return Err(QppError::Input(
                "model methods need pair embeddings or query and corpus texts".into(),
            ));
        }
        Ok(Self {
            run,
            labels,
            label_kind,
            targets,
            target_kind,
            source,
            side,
        })
    }

    /// Inputs from a synthetic collection. With `planted`, the planted labels
    /// serve as both supervision and target; otherwise labels come from the
    /// collection's judgments like a file-based run.
    pub fn from_synthetic(c: &SyntheticCollection, cfg: &ExperimentConfig, planted: bool) -> Result<Self> {
        let (labels, label_kind, targets, target_kind) = if planted {
            (c.planted.clone(), "planted".to_string(), c.planted.clone(), "planted".to_string())
        } else {
            (
                label_values(&compute_labels(&c.run, &c.qrels, cfg.label_kind)?),
                cfg.label_kind.to_string(),
                label_values(&compute_labels(&c.run, &c.qrels, cfg.target_kind)?),
                cfg.target_kind.to_string(),
            )
        };
        Ok(Self {
            run: c.run.clone(),
            labels,
            label_kind,
            targets,
            target_kind,
            source: Some(PairSource::Frozen(Arc::new(c.embeddings.clone()))),
            side: QuerySideInfo {
                collection_scores: c.collection_scores.clone(),
                query_lengths: BTreeMap::new(),
            },
        })
    }

    /// Queries present in the run with both a label and a target.
    pub fn qids(&self) -> Vec<String> {
        self.run
            .qids()
            .filter(|q| self.labels.contains_key(*q) && self.targets.contains_key(*q))
            .map(str::to_string)
            .collect()
    }

    pub fn model_config(&self, cfg: &ExperimentConfig) -> Result<ModelConfig> {
        let (d_model, encoder) = match &self.source {
            Some(PairSource::Frozen(store)) => (store.dim(), None),
            Some(PairSource::Tokens(_)) => (cfg.d_model, Some(cfg.encoder_config())),
            None => return Err(QppError::Input("no pair source loaded".into())),
        };
        let predictor = PredictorConfig {
            n_layers: cfg.n_layers,
            ..PredictorConfig::new(d_model, cfg.n_heads, cfg.group_size)
        };
        predictor.validate()?;
        Ok(ModelConfig { predictor, encoder })
    }
}

/// Token ids for every top-`depth` pair, with each document reduced to its
/// passage of highest query-term overlap.
pub fn pair_tokens(
    run: &RetrievalRun,
    queries: &BTreeMap<String, String>,
    corpus: &BTreeMap<String, String>,
    depth: usize,
    window: usize,
    stride: usize,
    enc: &EncoderConfig,
) -> Result<HashMap<PairKey, PairTokens>> {
    let mut out = HashMap::new();
    for (qid, list) in run.iter() {
        let text = queries
            .get(qid)
            .ok_or_else(|| QppError::Input(format!("no text for query {qid}")))?;
        let query = QueryRecord::new(qid, text)?;
        for e in list.iter().take(depth) {
            let text = corpus
                .get(&e.docid)
                .ok_or_else(|| QppError::Input(format!("no text for document {}", e.docid)))?;
            let doc = DocRecord::new(&e.docid, text)?;
            let passages = slice_passages(&doc.tokens, window, stride)?;
            let best = select_top_passage(&query, &passages, lexical_overlap);
            out.insert(
                PairKey::new(qid, &e.docid),
                PairTokens::new(&query.tokens, &passages[best].tokens, enc)?,
            );
        }
    }
    info!("tokenized {} pairs", out.len());
    Ok(out)
}
