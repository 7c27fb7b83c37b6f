use std::fs;
use std::path::{Path, PathBuf};

use super::config::ModelConfig;
use super::encoder::{PairSource, ToyEncoder};
use super::predictor::GroupwisePredictor;
use crate::autodiff::{ParamSet, Tape, Tensor, Var};
use crate::error::{QppError, Result};
use crate::grouping::Group;
use crate::rng::Rng;

/// Predictor parameters plus, when pairs enter as tokens, the toy encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupwiseModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    predictor: GroupwisePredictor,
    encoder: Option<ToyEncoder>,
}

impl GroupwiseModel {
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let predictor = GroupwisePredictor::init(config.predictor, &mut params, rng)?;
        let encoder = config
            .encoder
            .map(|e| ToyEncoder::init(e, config.predictor.d_model, &mut params, rng))
            .transpose()?;
        Ok(Self {
            config,
            params,
            predictor,
            encoder,
        })
    }

    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        let predictor = GroupwisePredictor::resolve(config.predictor, &params)?;
        let encoder = config
            .encoder
            .map(|e| ToyEncoder::resolve(e, config.predictor.d_model, &params))
            .transpose()?;
        if params.len() != 3 + 15 * config.predictor.n_layers + 3 * usize::from(encoder.is_some()) {
            return Err(QppError::Format(format!(
                "checkpoint has {} tensors, which does not match the configuration",
                params.len()
            )));
        }
        Ok(Self {
            config,
            params,
            predictor,
            encoder,
        })
    }

    pub fn predictor(&self) -> &GroupwisePredictor {
        &self.predictor
    }

    pub fn encoder(&self) -> Option<&ToyEncoder> {
        self.encoder.as_ref()
    }

    /// `[n, d]` input matrix for a group. Padded slots are zero rows.
    pub fn encode_group(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        group: &Group,
        source: &PairSource,
    ) -> Result<Var> {
        let d = self.config.predictor.d_model;
        match source {
            PairSource::Frozen(store) => {
                if store.dim() != d {
                    return Err(QppError::Input(format!(
                        "embeddings have dimension {}, model expects {d}",
                        store.dim()
                    )));
                }
                let mut data = vec![0.0; group.len() * d];
                for (slot, key) in group.valid() {
                    let rec = store.get(&key.qid, &key.docid).ok_or_else(|| {
                        QppError::Input(format!(
                            "no embedding for pair ({}, {})",
                            key.qid, key.docid
                        ))
                    })?;
                    for (o, &v) in data[slot * d..(slot + 1) * d].iter_mut().zip(&rec.vec) {
                        *o = f64::from(v);
                    }
                }
                Ok(tape.constant(Tensor::matrix(group.len(), d, data)?))
            }
            PairSource::Tokens(tokens) => {
                let enc = self.encoder.as_ref().ok_or_else(|| {
                    QppError::Contract("token input needs a model with an encoder".into())
                })?;
                let mut rows = Vec::with_capacity(group.len());
                let mut zero = None;
                for item in &group.items {
                    match item {
                        Some(key) => {
                            let pair = tokens.get(key).ok_or_else(|| {
                                QppError::Input(format!(
                                    "no tokens for pair ({}, {})",
                                    key.qid, key.docid
                                ))
                            })?;
                            rows.push(enc.encode(tape, vars, pair)?);
                        }
                        None => {
                            let z = *zero.get_or_insert_with(|| {
                                tape.constant(Tensor::zeros(&[1, d]))
                            });
                            rows.push(z);
                        }
                    }
                }
                tape.concat_rows(&rows)
            }
        }
    }

    /// `[n, 1]` predictions for a group.
    pub fn forward_group(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        group: &Group,
        source: &PairSource,
    ) -> Result<Var> {
        let x = self.encode_group(tape, vars, group, source)?;
        self.predictor
            .forward(tape, vars, x, &group.position_ids, &group.mask)
    }

    /// Predictions for the valid slots of `group`, in slot order.
    pub fn predict_group(&self, group: &Group, source: &PairSource) -> Result<Vec<(usize, f64)>> {
        let mut tape = Tape::new();
        let vars = self.params.bind_frozen(&mut tape);
        let out = self.forward_group(&mut tape, &vars, group, source)?;
        let values = tape.value(out).data();
        Ok(group.valid().map(|(slot, _)| (slot, values[slot])).collect())
    }

    /// Writes the checkpoint at `path` and the configuration at `<path>.config.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.params.save_checkpoint(path)?;
        let cfg = serde_json::to_string_pretty(&self.config)
            .map_err(|e| QppError::Format(e.to_string()))?;
        let cfg_path = config_path(path);
        fs::write(&cfg_path, cfg).map_err(|e| QppError::io(&cfg_path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cfg_path = config_path(path);
        let raw = fs::read_to_string(&cfg_path).map_err(|e| QppError::io(&cfg_path, e))?;
        let config: ModelConfig = serde_json::from_str(&raw)
            .map_err(|e| QppError::Format(format!("{}: {e}", cfg_path.display())))?;
        Self::from_params(config, ParamSet::load_checkpoint(path)?)
    }
}

fn config_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;
    use std::sync::Arc;

    use rand::Rng as _;

    use super::*;
    use crate::autodiff::grad_check;
    use crate::data::{PairEmbedding, PairEmbeddingStore};
    use crate::grouping::{GroupKind, PairKey};
    use crate::model::{mse_loss, EncoderConfig, PairTokens, PredictorConfig};
    use crate::rng;

    fn frozen_fixture(n: usize, d: usize, seed: u64) -> (Group, PairSource) {
        let mut r = rng::stream(seed, &[1]);
        let mut store = PairEmbeddingStore::new(d, "test").unwrap();
        let mut keys = Vec::new();
        for i in 0..n {
            let key = PairKey::new(format!("q{i}"), "d");
            store
                .push(PairEmbedding {
                    qid: key.qid.clone(),
                    docid: key.docid.clone(),
                    rank: 1,
                    vec: (0..d).map(|_| r.random_range(-1.0f32..1.0)).collect(),
                })
                .unwrap();
            keys.push(key);
        }
        let g = Group::new(keys, vec![0; n], GroupKind::Query).unwrap();
        (g, PairSource::Frozen(Arc::new(store)))
    }

    fn frozen_model(d: usize, heads: usize, positions: usize) -> GroupwiseModel {
        let cfg = ModelConfig {
            predictor: PredictorConfig::new(d, heads, positions),
            encoder: None,
        };
        GroupwiseModel::init(cfg, &mut rng::stream(9, &[2])).unwrap()
    }

    #[test]
    fn output_shape_and_padding() {
        let model = frozen_model(8, 2, 4);
        let (g, src) = frozen_fixture(3, 8, 1);
        let g = crate::grouping::pad_group(g, 4).unwrap();
        let out = model.predict_group(&g, &src).unwrap();
        assert_eq!(out.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(out.iter().all(|p| p.1.is_finite()));

        let mut tape = Tape::new();
        let vars = model.params.bind_frozen(&mut tape);
        let y = model.forward_group(&mut tape, &vars, &g, &src).unwrap();
        assert_eq!(tape.shape(y), &[4, 1]);
    }

    #[test]
    fn padding_does_not_change_valid_outputs() {
        let model = frozen_model(8, 2, 8);
        let (g, src) = frozen_fixture(3, 8, 4);
        let a = model.predict_group(&g, &src).unwrap();
        let b = model
            .predict_group(&crate::grouping::pad_group(g, 8).unwrap(), &src)
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance_all_24() {
        let model = frozen_model(16, 4, 4);
        let (g, src) = frozen_fixture(4, 16, 5);
        let base = model.predict_group(&g, &src).unwrap();
        let mut perms = Vec::new();
        permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
        assert_eq!(perms.len(), 24);
        for p in perms {
            let items: Vec<PairKey> = p.iter().map(|&i| g.items[i].clone().unwrap()).collect();
            let pg = Group::new(items, vec![0; 4], GroupKind::Query).unwrap();
            let out = model.predict_group(&pg, &src).unwrap();
            for (slot, &i) in p.iter().enumerate() {
                assert!((out[slot].1 - base[i].1).abs() <= 1e-9);
            }
        }
    }

    fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, out);
            v.swap(k, i);
        }
    }

    #[test]
    fn singleton_group_is_pointwise() {
        let model = frozen_model(8, 2, 4);
        let (g, src) = frozen_fixture(3, 8, 6);
        let joint = model.predict_group(&g, &src).unwrap();
        for (slot, key) in g.valid() {
            let single = Group::new(vec![key.clone()], vec![0], GroupKind::Random).unwrap();
            let alone = model.predict_group(&single, &src).unwrap()[0].1;
            let padded = crate::grouping::pad_group(single, 4).unwrap();
            assert_eq!(model.predict_group(&padded, &src).unwrap()[0].1, alone);
            assert!(alone.is_finite());
            let _ = joint[slot];
        }
    }

    #[test]
    fn contract_errors() {
        let model = frozen_model(8, 2, 2);
        let (g, src) = frozen_fixture(3, 8, 1);
        let g = Group::new(g.valid().map(|p| p.1.clone()).collect(), vec![0, 1, 2], GroupKind::Doc).unwrap();
        assert!(matches!(
            model.predict_group(&g, &src),
            Err(QppError::Contract(_))
        ));
        let (_, wrong_dim) = frozen_fixture(2, 4, 1);
        let (g2, _) = frozen_fixture(2, 4, 1);
        assert!(model.predict_group(&g2, &wrong_dim).is_err());
    }

    #[test]
    fn init_is_deterministic_and_checkpoint_round_trips() {
        let a = frozen_model(8, 2, 4);
        let b = frozen_model(8, 2, 4);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qppm");
        a.save(&path).unwrap();
        assert_eq!(GroupwiseModel::load(&path).unwrap(), a);
    }

    pub(crate) fn token_fixture(n: usize, cfg: &EncoderConfig) -> (Group, PairSource) {
        let mut map = HashMap::new();
        let mut keys = Vec::new();
        for i in 0..n {
            let key = PairKey::new(format!("q{i}"), format!("d{i}"));
            let q: Vec<String> = (0..2 + i % 3).map(|t| format!("w{}", t * 7 + i)).collect();
            let d: Vec<String> = (0..3 + i).map(|t| format!("w{}", t * 3 + 2 * i)).collect();
            map.insert(key.clone(), PairTokens::new(&q, &d, cfg).unwrap());
            keys.push(key);
        }
        let g = Group::new(keys, (0..n).collect(), GroupKind::Doc).unwrap();
        (g, PairSource::Tokens(Arc::new(map)))
    }

    #[test]
    fn gradient_check_with_encoder() {
        let enc = EncoderConfig {
            vocab_size: 31,
            token_dim: 8,
            max_pair_tokens: 256,
        };
        let cfg = ModelConfig {
            predictor: PredictorConfig::new(16, 4, 6),
            encoder: Some(enc),
        };
        let model = GroupwiseModel::init(cfg, &mut rng::stream(3, &[4])).unwrap();
        let (g, src) = token_fixture(5, &enc);
        let g = crate::grouping::pad_group(g, 6).unwrap();
        let labels = [0.1, 0.9, 0.4, 0.3, 0.7, 0.0];
        let report = grad_check(
            |tape, vars| {
                let out = model.forward_group(tape, vars, &g, &src)?;
                mse_loss(tape, out, &labels, &g.mask)
            },
            &model.params,
            1e-5,
        )
        .unwrap();
        assert_eq!(report.coordinates, model.params.num_scalars());
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }
}
