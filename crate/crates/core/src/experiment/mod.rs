//! The repeated two-fold protocol, interpolation tuning, parameter sweeps
//! and reports.

mod config;
mod inputs;
mod labels;
mod protocol;
mod report;
mod sweep;

pub use config::{default_label_kind, ExperimentConfig, METHODS};
pub use inputs::{pair_tokens, ExperimentInputs};
pub use labels::{
    compute_labels, label_values, parse_label_file, parse_predictions, serialize_labels,
    serialize_predictions, LabelFile,
};
pub use protocol::{
    correlate, initial_qpp, run_and_write, run_experiment, run_split, run_splits, split_plan,
    MethodSplit, SplitResult, TunedParams,
};
pub use report::{
    build_report, config_hash, ExperimentReport, MethodSummary, PairedComparison, Provenance,
    FULL_SCALE_REFERENCE,
};
pub use sweep::{sweep, SweepAxis, SweepReport, SweepRow};
