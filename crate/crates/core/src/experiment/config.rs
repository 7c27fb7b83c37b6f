use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QppError, Result};
use crate::grouping::GroupingStrategy;
use crate::metrics::{LabelKind, DEFAULT_SPLITS};
use crate::model::{Aggregation, EncoderConfig, TrainConfig};

/// Method names accepted in `methods`.
pub const METHODS: [&str; 7] = ["sigma_k", "nqc", "wig", "smv", "nsigma", "model", "model+nsigma"];

/// Everything one protocol run needs. Serialized as a flat TOML table; any
/// key may be omitted to take its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    /// `qid value kind` file used as both supervision and evaluation target
    /// instead of judgments.
    pub labels: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub collection_scores: Option<PathBuf>,
    pub out: PathBuf,

    pub methods: Vec<String>,
    pub strategy: GroupingStrategy,
    pub group_size: usize,
    pub train_depth: usize,
    pub infer_depth: usize,
    pub label_kind: LabelKind,
    pub target_kind: LabelKind,
    /// Depth of σ_k, NQC, WIG and SMV.
    pub k: usize,
    pub lambda_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// X of the n(σ_X%) predictor that orders queries inside query groups.
    pub initial_x: f64,

    pub epochs: usize,
    pub lr_grid: Vec<f64>,
    pub warmup_fraction: f64,
    pub aggregations: Vec<Aggregation>,
    pub inner_train_fraction: f64,
    /// Width of the toy encoder path; frozen embeddings fix it to their dimension.
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub vocab_size: usize,
    pub token_dim: usize,
    pub window: usize,
    pub stride: usize,

    pub seed: u64,
    pub n_splits: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        Self {
            run: None,
            qrels: None,
            labels: None,
            embeddings: None,
            queries: None,
            corpus: None,
            collection_scores: None,
            out: PathBuf::from("out"),
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            strategy: GroupingStrategy::Rqd,
            group_size: 8,
            train_depth: 100,
            infer_depth: 25,
            label_kind: LabelKind::P10,
            target_kind: LabelKind::AP1000,
            k: 100,
            lambda_grid: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            x_grid: vec![25.0, 50.0, 75.0, 100.0],
            initial_x: 50.0,
            epochs: 5,
            lr_grid: vec![1e-4, 1e-5, 1e-6],
            warmup_fraction: 0.1,
            aggregations: Aggregation::ALL.to_vec(),
            inner_train_fraction: 0.8,
            d_model: 32,
            n_heads: 4,
            n_layers: 4,
            vocab_size: enc.vocab_size,
            token_dim: enc.token_dim,
            window: crate::data::DEFAULT_WINDOW,
            stride: crate::data::DEFAULT_STRIDE,
            seed: 0,
            n_splits: DEFAULT_SPLITS,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(raw: &str) -> Result<Self> {
        toml::from_str(raw).map_err(|e| QppError::Format(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| QppError::io(path, e))?;
        Self::from_toml(&raw)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn needs_model(&self) -> bool {
        self.methods.iter().any(|m| m.starts_with("model"))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.methods.iter().find(|m| !METHODS.contains(&m.as_str())) {
            return Err(QppError::Input(format!(
                "unknown method '{m}' (known: {})",
                METHODS.join(", ")
            )));
        }
        if self.methods.is_empty() {
            return Err(QppError::Input("no methods selected".into()));
        }
        if self.n_splits == 0 || self.k == 0 {
            return Err(QppError::Input("n_splits and k must be >= 1".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(QppError::Input("lambda grid must be non-empty within [0, 1]".into()));
        }
        let bad_x = |x: &f64| !(*x > 0.0 && *x <= 100.0);
        if self.x_grid.is_empty() || self.x_grid.iter().any(bad_x) || bad_x(&self.initial_x) {
            return Err(QppError::Input("X values must lie in (0, 100]".into()));
        }
        self.train_config().validate()
    }

    /// Check that every referenced input file exists.
    pub fn check_paths(&self) -> Result<()> {
        let paths = [
            &self.run,
            &self.qrels,
            &self.labels,
            &self.embeddings,
            &self.queries,
            &self.corpus,
            &self.collection_scores,
        ];
        for p in paths.into_iter().flatten() {
            if !p.exists() {
                return Err(QppError::MissingData(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            group_size: self.group_size,
            lr_grid: self.lr_grid.clone(),
            warmup_fraction: self.warmup_fraction,
            train_depth: self.train_depth,
            infer_depth: self.infer_depth,
            strategy: self.strategy,
            aggregations: self.aggregations.clone(),
            inner_train_fraction: self.inner_train_fraction,
            seed: self.seed,
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            vocab_size: self.vocab_size,
            token_dim: self.token_dim,
            ..EncoderConfig::default()
        }
    }
}

/// Default supervision label for a collection profile: AP@1000 for web-scale
/// collections, P@10 otherwise.
pub fn default_label_kind(collection: &str) -> LabelKind {
    let c = collection.to_ascii_lowercase();
    if c.contains("clueweb") {
        LabelKind::AP1000
    } else {
        LabelKind::P10
    }
}
