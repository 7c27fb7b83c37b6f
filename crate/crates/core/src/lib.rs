//! Groupwise query performance prediction.
//!
//! The crate bundles everything needed to predict how well a query was served
//! by a retrieval run and to evaluate such predictions:
//!
//! * [`data`]: TREC run/qrels ingestion, passage slicing, pair embeddings.
//! * [`metrics`]: P@k, AP, Pearson ρ, Kendall τ-b, splits, paired t-test.
//! * [`baselines`]: score-distribution predictors (σ_k, NQC, WIG, SMV, n(σ_X%)).
//! * [`autodiff`]: a small reverse-mode tape with Adam.
//! * [`grouping`]: groups of (query, document) pairs with ordering-aware position ids.
//! * [`model`]: the toy pair encoder and the 4-layer groupwise predictor.
//! * [`experiment`]: the 30×2-fold protocol, sweeps and reports.

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grouping;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthetic;

pub use error::{QppError, Result};
