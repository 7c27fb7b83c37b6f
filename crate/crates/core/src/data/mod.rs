//! Domain types and ingestion: TREC runs and qrels, query/document text,
//! passage slicing, and the pair-embedding interchange store.

mod embeddings;
mod qrels;
mod run;
mod text;

pub use embeddings::{PairEmbedding, PairEmbeddingStore, EMBEDDING_MAGIC, EMBEDDING_VERSION};
pub use qrels::{parse_qrels, serialize_qrels, Qrels, QrelsRecord};
pub use run::{parse_run, serialize_run, RetrievalRun, RunEntry};
pub use text::{
    lexical_overlap, parse_texts, select_top_passage, slice_passages, tokenize, DocRecord,
    PassageWindow, QueryRecord, DEFAULT_STRIDE, DEFAULT_WINDOW,
};

use std::path::Path;

use crate::error::{QppError, Result};

pub(crate) fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| QppError::io(path, e))
}
