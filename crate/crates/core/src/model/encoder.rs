use std::collections::HashMap;
use std::sync::Arc;

use super::config::EncoderConfig;
use crate::autodiff::{ParamSet, Tape, Var};
use crate::data::PairEmbeddingStore;
use crate::error::{QppError, Result};
use crate::grouping::PairKey;
use crate::rng::Rng;

/// FNV-1a hash of a token, folded into the vocabulary.
pub fn token_id(token: &str, vocab_size: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (h % vocab_size as u64) as usize
}

/// Token ids of one (query, passage) pair after truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTokens {
    pub query: Vec<usize>,
    pub doc: Vec<usize>,
}

impl PairTokens {
    /// The query keeps at most `max_pair_tokens` tokens and the document
    /// fills what remains.
    pub fn new(query: &[String], doc: &[String], cfg: &EncoderConfig) -> Result<Self> {
        let q_len = query.len().min(cfg.max_pair_tokens);
        let d_len = doc.len().min(cfg.max_pair_tokens - q_len);
        if q_len == 0 || d_len == 0 {
            return Err(QppError::Input(
                "empty query or document after truncation".into(),
            ));
        }
        let ids = |t: &[String]| t.iter().map(|s| token_id(s, cfg.vocab_size)).collect();
        Ok(Self {
            query: ids(&query[..q_len]),
            doc: ids(&doc[..d_len]),
        })
    }
}

/// Mean query-token embedding ⊕ mean document-token embedding, projected to d.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub config: EncoderConfig,
    pub d_model: usize,
    tok_emb: usize,
    proj_w: usize,
    proj_b: usize,
}

impl ToyEncoder {
    pub fn init(cfg: EncoderConfig, d_model: usize, params: &mut ParamSet, rng: &mut Rng) -> Result<Self> {
        let de = cfg.token_dim;
        params.insert_uniform("encoder.tok_emb", &[cfg.vocab_size, de], de, rng)?;
        params.insert_uniform("encoder.proj_w", &[2 * de, d_model], 2 * de, rng)?;
        params.insert_uniform("encoder.proj_b", &[1, d_model], 2 * de, rng)?;
        Self::resolve(cfg, d_model, params)
    }

    pub fn resolve(cfg: EncoderConfig, d_model: usize, params: &ParamSet) -> Result<Self> {
        let de = cfg.token_dim;
        Ok(Self {
            config: cfg,
            d_model,
            tok_emb: lookup(params, "encoder.tok_emb", &[cfg.vocab_size, de])?,
            proj_w: lookup(params, "encoder.proj_w", &[2 * de, d_model])?,
            proj_b: lookup(params, "encoder.proj_b", &[1, d_model])?,
        })
    }

    /// `[1, d]` vector for one pair.
    pub fn encode(&self, tape: &mut Tape, vars: &[Var], pair: &PairTokens) -> Result<Var> {
        let q = tape.gather_rows(vars[self.tok_emb], &pair.query)?;
        let q = tape.mean_rows(q)?;
        let d = tape.gather_rows(vars[self.tok_emb], &pair.doc)?;
        let d = tape.mean_rows(d)?;
        let cat = tape.concat_cols(&[q, d])?;
        let z = tape.matmul(cat, vars[self.proj_w])?;
        tape.add(z, vars[self.proj_b])
    }
}

pub(crate) fn lookup(params: &ParamSet, name: &str, shape: &[usize]) -> Result<usize> {
    let i = params
        .index_of(name)
        .ok_or_else(|| QppError::Format(format!("missing parameter {name}")))?;
    if params.tensor(i).shape() != shape {
        return Err(QppError::Format(format!(
            "parameter {name} has shape {:?}, expected {shape:?}",
            params.tensor(i).shape()
        )));
    }
    Ok(i)
}

/// Where pair vectors come from: frozen imported embeddings, or token ids fed
/// through the trainable toy encoder.
#[derive(Debug, Clone)]
pub enum PairSource {
    Frozen(Arc<PairEmbeddingStore>),
    Tokens(Arc<HashMap<PairKey, PairTokens>>),
}

impl PairSource {
    pub fn contains(&self, qid: &str, docid: &str) -> bool {
        match self {
            PairSource::Frozen(s) => s.get(qid, docid).is_some(),
            PairSource::Tokens(m) => m.contains_key(&PairKey::new(qid, docid)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_budget() {
        let cfg = EncoderConfig {
            vocab_size: 97,
            token_dim: 4,
            max_pair_tokens: 10,
        };
        let words = |n: usize| (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>();
        let p = PairTokens::new(&words(3), &words(50), &cfg).unwrap();
        assert_eq!((p.query.len(), p.doc.len()), (3, 7));
        assert!(PairTokens::new(&words(10), &words(5), &cfg).is_err());
        assert!(PairTokens::new(&words(2), &[], &cfg).is_err());
        assert!(p.query.iter().all(|&i| i < 97));
        assert_eq!(token_id("abc", 1 << 15), token_id("abc", 1 << 15));
    }
}
