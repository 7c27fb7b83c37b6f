//! The pair encoder, the groupwise self-attention predictor, training with
//! learning-rate selection, and per-query aggregation.

mod config;
mod encoder;
mod inference;
mod network;
mod predictor;
mod train;

pub use config::{EncoderConfig, ModelConfig, ModelProfile, PredictorConfig};
pub use encoder::{token_id, PairSource, PairTokens, ToyEncoder};
pub use inference::{
    aggregate, predict_pairs, predict_queries, predict_query, Aggregation, InferenceSpec,
    PairPredictions,
};
pub use network::GroupwiseModel;
pub use predictor::{mse_loss, GroupwisePredictor, MASKED_LOGIT};
pub use train::{
    fit, inner_split, train, Candidate, FitLog, LogRecord, TrainConfig, TrainData, TrainOutcome,
};
